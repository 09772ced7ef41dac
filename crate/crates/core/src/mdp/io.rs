//! Environment files.
//!
//! Two TOML layouts share one document type, selected by `kind`:
//!
//! ```toml
//! kind = "grid"
//! rows = 1
//! cols = 3
//! gamma = 0.9
//! props = ["goal"]
//! start = [0, 0]
//! slip = [0.8, 0.1, 0.1]
//!
//! [[cell]]
//! at = [0, 2]
//! labels = ["goal"]
//! reward = 1.0
//! ```
//!
//! ```toml
//! kind = "explicit"
//! gamma = 0.9
//! props = ["b"]
//! initial = "s0"
//!
//! [[state]]
//! name = "s0"
//! reward = 1.0
//!
//! [[state.action]]
//! name = "stay"
//! to = [["s0", 1.0]]
//! ```
//!
//! Writing an explicit MDP lists states by id, actions in declaration order
//! and successors by id, so write-read-write is byte stable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_gridworld, GridError, GridSpec, LabeledMdp, MdpBuilder, MdpError};
use crate::alphabet::Alphabet;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot parse environment file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot write environment file: {0}")]
    Write(#[from] toml::ser::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvSpec {
    Grid(GridSpec),
    Explicit(ExplicitMdp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitMdp {
    pub gamma: f64,
    #[serde(default)]
    pub props: Vec<String>,
    pub initial: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_bound: Option<f64>,
    #[serde(rename = "state")]
    pub states: Vec<ExplicitState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitState {
    pub name: String,
    #[serde(default)]
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(rename = "action")]
    pub actions: Vec<ExplicitAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitAction {
    pub name: String,
    pub to: Vec<(String, f64)>,
}

impl EnvSpec {
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, EnvError> {
        Ok(toml::to_string(self)?)
    }

    pub fn build(&self) -> Result<LabeledMdp, EnvError> {
        match self {
            EnvSpec::Grid(g) => Ok(build_gridworld(g)?),
            EnvSpec::Explicit(e) => Ok(e.build()?),
        }
    }
}

impl ExplicitMdp {
    pub fn build(&self) -> Result<LabeledMdp, MdpError> {
        let props = Alphabet::new(self.props.iter().cloned())?;
        let mut b = MdpBuilder::new(self.gamma, props);
        for st in &self.states {
            let labels: Vec<&str> = st.labels.iter().map(String::as_str).collect();
            b.state(st.name.clone(), st.reward, &labels)?;
        }
        let lookup = |name: &str| {
            self.states
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| MdpError::UnknownState(name.to_string()))
        };
        for (s, st) in self.states.iter().enumerate() {
            for act in &st.actions {
                let dist = act
                    .to
                    .iter()
                    .map(|(t, p)| Ok((lookup(t)?, *p)))
                    .collect::<Result<Vec<_>, MdpError>>()?;
                b.action(s, &act.name, dist);
            }
        }
        b.initial(lookup(&self.initial)?);
        if let Some(bound) = self.reward_bound {
            b.reward_bound(bound);
        }
        b.build()
    }

    /// Canonical explicit description of any MDP, grid-built ones included.
    pub fn from_mdp(mdp: &LabeledMdp) -> Self {
        let states = (0..mdp.num_states())
            .map(|s| ExplicitState {
                name: mdp.state_name(s).to_string(),
                reward: mdp.reward(s),
                labels: mdp
                    .props()
                    .letter_names(mdp.label(s))
                    .into_iter()
                    .map(str::to_string)
                    .collect(),
                actions: mdp
                    .actions(s)
                    .map(|a| {
                        let mut to: Vec<_> = mdp.transition(s, a).unwrap().to_vec();
                        to.sort_by_key(|(t, _)| *t);
                        ExplicitAction {
                            name: mdp.action_name(a).to_string(),
                            to: to
                                .into_iter()
                                .map(|(t, p)| (mdp.state_name(t).to_string(), p))
                                .collect(),
                        }
                    })
                    .collect(),
            })
            .collect();
        ExplicitMdp {
            gamma: mdp.gamma(),
            props: mdp.props().names().to_vec(),
            initial: mdp.state_name(mdp.initial()).to_string(),
            reward_bound: Some(mdp.reward_bound()),
            states,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn explicit_round_trip_is_byte_stable() {
        let m = fixtures::example1(0.99);
        let text = EnvSpec::Explicit(ExplicitMdp::from_mdp(&m))
            .to_toml()
            .unwrap();
        let back = EnvSpec::parse(&text).unwrap();
        let rebuilt = back.build().unwrap();
        assert_eq!(rebuilt.num_states(), 2);
        assert_eq!(back.to_toml().unwrap(), text);
        let again = EnvSpec::Explicit(ExplicitMdp::from_mdp(&rebuilt))
            .to_toml()
            .unwrap();
        assert_eq!(again, text);
    }

    #[test]
    fn grid_round_trip() {
        let spec = EnvSpec::Grid(fixtures::case_study_grid());
        let text = spec.to_toml().unwrap();
        let back = EnvSpec::parse(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.build().unwrap().num_states(), 30);
    }

    #[test]
    fn unknown_successor_is_an_error() {
        let text = r#"
kind = "explicit"
gamma = 0.5
initial = "a"
[[state]]
name = "a"
[[state.action]]
name = "go"
to = [["nowhere", 1.0]]
"#;
        let err = EnvSpec::parse(text).unwrap().build().unwrap_err();
        assert!(matches!(err, EnvError::Mdp(MdpError::UnknownState(s)) if s == "nowhere"));
    }
}
