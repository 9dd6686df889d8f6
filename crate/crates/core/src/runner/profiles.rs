use std::collections::BTreeMap;

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantRequirement {
    pub file: String,
    #[serde(default)]
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverProfile {
    pub name: String,
    pub fields: Vec<String>,
    #[serde(default)]
    pub turbulence: bool,
    pub algorithms: Vec<String>,
    pub solvers: Vec<String>,
    pub constant: Vec<ConstantRequirement>,
    #[serde(default)]
    pub dimensions: BTreeMap<String, [i32; 7]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityProfile {
    pub name: String,
    pub dict: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverProfiles {
    pub schema_version: u32,
    #[serde(rename = "solver")]
    pub solvers: Vec<SolverProfile>,
    #[serde(default)]
    pub turbulence_fields: BTreeMap<String, Vec<String>>,
    #[serde(default, rename = "utility")]
    pub utilities: Vec<UtilityProfile>,
}

pub const BUILTIN_PROFILES: &str = include_str!("solver_profiles.toml");

impl SolverProfiles {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PROFILES).expect("builtin solver profiles parse")
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn solver(&self, name: &str) -> Option<&SolverProfile> {
        self.solvers.iter().find(|s| s.name == name)
    }

    pub fn utility(&self, name: &str) -> Option<&UtilityProfile> {
        self.utilities.iter().find(|u| u.name == name)
    }
}
