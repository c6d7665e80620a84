use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States, player types and the per-(type, state) action sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    states: Vec<String>,
    types: Vec<String>,
    actions: Vec<Vec<Vec<String>>>,
}

impl StateSpace {
    /// `actions[ty][state]` lists the action labels available to `ty` in `state`.
    pub fn new(
        states: Vec<String>,
        types: Vec<String>,
        actions: Vec<Vec<Vec<String>>>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::ShapeMismatch("state space is empty".into()));
        }
        if types.is_empty() {
            return Err(Error::ShapeMismatch("type set is empty".into()));
        }
        unique(&states)?;
        unique(&types)?;
        if actions.len() != types.len() {
            return Err(Error::ShapeMismatch(format!(
                "actions given for {} types, expected {}",
                actions.len(),
                types.len()
            )));
        }
        for (ty, per_state) in actions.iter().enumerate() {
            if per_state.len() != states.len() {
                return Err(Error::ShapeMismatch(format!(
                    "type `{}` lists actions for {} states, expected {}",
                    types[ty],
                    per_state.len(),
                    states.len()
                )));
            }
            for (state, acts) in per_state.iter().enumerate() {
                if acts.is_empty() {
                    return Err(Error::EmptyActionSet { ty, state });
                }
                unique(acts)?;
            }
        }
        Ok(Self {
            states,
            types,
            actions,
        })
    }

    /// Single type, the same action labels in every state.
    pub fn simple(states: &[&str], actions: &[&str]) -> Result<Self> {
        let states: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let acts: Vec<String> = actions.iter().map(|s| s.to_string()).collect();
        let per_state = vec![acts; states.len()];
        Self::new(states, vec!["population".into()], vec![per_state])
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn n_actions(&self, ty: usize, state: usize) -> usize {
        self.actions[ty][state].len()
    }

    pub fn max_actions(&self) -> usize {
        self.actions
            .iter()
            .flat_map(|per_state| per_state.iter().map(Vec::len))
            .max()
            .unwrap_or(0)
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn actions(&self, ty: usize, state: usize) -> &[String] {
        &self.actions[ty][state]
    }
}

fn unique(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_action_set() {
        let err = StateSpace::new(
            vec!["a".into(), "b".into()],
            vec!["t".into()],
            vec![vec![vec!["x".into()], vec![]]],
        )
        .unwrap_err();
        assert_eq!(err, Error::EmptyActionSet { ty: 0, state: 1 });
    }

    #[test]
    fn rejects_duplicate_states() {
        assert!(matches!(
            StateSpace::simple(&["a", "a"], &["x"]),
            Err(Error::DuplicateLabel(_))
        ));
    }
}
