use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// What a symbol stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    State,
    Input,
    WParam,
    FeedbackParam,
    PlantConstant,
}

impl Role {
    /// States and inputs are polynomial variables; everything else lives in coefficients.
    pub fn is_variable(self) -> bool {
        matches!(self, Role::State | Role::Input)
    }

    /// Parameters a solver is allowed to assign.
    pub fn is_decision(self) -> bool {
        matches!(self, Role::WParam | Role::FeedbackParam)
    }
}

#[derive(Debug)]
struct SymbolData {
    role: Role,
    index: Vec<u32>,
    name: String,
}

/// A named symbol with an immutable role.
///
/// Ordering is by `(role, index, name)`, so W-parameters sort by their
/// `(sigma, rho, iteration)` triple and feedback parameters by declaration.
#[derive(Clone)]
pub struct Symbol(Arc<SymbolData>);

impl Symbol {
    pub fn new(name: impl Into<String>, role: Role, index: Vec<u32>) -> Self {
        Symbol(Arc::new(SymbolData {
            role,
            index,
            name: name.into(),
        }))
    }

    /// State variable at 0-based polynomial position `pos`.
    pub fn state(name: impl Into<String>, pos: u32) -> Self {
        Self::new(name, Role::State, vec![pos])
    }

    /// Input variable at 0-based polynomial position `pos` (inputs follow the states).
    pub fn input(name: impl Into<String>, pos: u32) -> Self {
        Self::new(name, Role::Input, vec![pos])
    }

    /// Undetermined parameter: coefficient of `x_rho` in the linear form led by
    /// `x_sigma`, minted at iteration `k`. All indices are 1-based.
    pub fn w_param(sigma: u32, rho: u32, k: u32) -> Self {
        Self::new(
            format!("W_{sigma}_{rho}_{k}"),
            Role::WParam,
            vec![sigma, rho, k],
        )
    }

    pub fn feedback_param(name: impl Into<String>, index: Vec<u32>) -> Self {
        Self::new(name, Role::FeedbackParam, index)
    }

    pub fn plant_constant(name: impl Into<String>, ordinal: u32) -> Self {
        Self::new(name, Role::PlantConstant, vec![ordinal])
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn role(&self) -> Role {
        self.0.role
    }

    pub fn index(&self) -> &[u32] {
        &self.0.index
    }

    /// Polynomial position for states and inputs.
    pub fn var(&self) -> Option<u32> {
        if self.role().is_variable() {
            self.0.index.first().copied()
        } else {
            None
        }
    }

    fn key(&self) -> (Role, &[u32], &str) {
        (self.0.role, &self.0.index, &self.0.name)
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.key() == other.key()
    }
}

impl Eq for Symbol {}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.key().cmp(&other.key())
    }
}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.name)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w_params_order_by_triple() {
        let a = Symbol::w_param(3, 1, 1);
        let b = Symbol::w_param(3, 2, 1);
        let c = Symbol::w_param(2, 1, 2);
        let mut v = vec![a.clone(), b.clone(), c.clone()];
        v.sort();
        assert_eq!(v, vec![c, a, b]);
        assert_eq!(Symbol::w_param(2, 1, 14).name(), "W_2_1_14");
    }

    #[test]
    fn variables_carry_positions() {
        assert_eq!(Symbol::state("x", 0).var(), Some(0));
        assert_eq!(Symbol::input("u1", 3).var(), Some(3));
        assert_eq!(Symbol::plant_constant("a1", 0).var(), None);
        assert!(Role::WParam.is_decision());
        assert!(!Role::PlantConstant.is_decision());
    }
}
