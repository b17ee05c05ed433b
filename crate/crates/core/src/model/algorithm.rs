use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Algorithms that produce a path set on their own. These are the valid
/// bases for semi-oblivious rate adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathSelector {
    Spf,
    Ecmp,
    Ksp,
    Vlb,
    Raecke,
    Mcf,
    Mw,
}

impl PathSelector {
    pub fn name(self) -> &'static str {
        match self {
            PathSelector::Spf => "spf",
            PathSelector::Ecmp => "ecmp",
            PathSelector::Ksp => "ksp",
            PathSelector::Vlb => "vlb",
            PathSelector::Raecke => "raecke",
            PathSelector::Mcf => "mcf",
            PathSelector::Mw => "mw",
        }
    }

    pub const ALL: [PathSelector; 7] = [
        PathSelector::Spf,
        PathSelector::Ecmp,
        PathSelector::Ksp,
        PathSelector::Vlb,
        PathSelector::Raecke,
        PathSelector::Mcf,
        PathSelector::Mw,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    Spf,
    Ecmp,
    Ksp,
    Vlb,
    Raecke,
    Mcf,
    Mw,
    /// Fixed paths from the base selector, weights re-solved per demand.
    SemiMcf(PathSelector),
    SemiMcfMcfEnv,
    SemiMcfMcfFtEnv,
    /// Omniscient baseline: MCF on actual demands and the live topology.
    OptimalMcf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adaptivity {
    /// Paths and weights fixed at set-up time.
    Oblivious,
    /// Paths fixed, weights adapted to demands.
    SemiOblivious,
    /// Paths and weights both recomputed.
    Conscious,
}

impl AlgorithmKind {
    pub fn adaptivity(self) -> Adaptivity {
        use AlgorithmKind::*;
        match self {
            Spf | Ecmp | Ksp | Vlb | Raecke => Adaptivity::Oblivious,
            SemiMcf(_) | SemiMcfMcfEnv | SemiMcfMcfFtEnv => Adaptivity::SemiOblivious,
            Mcf | Mw | OptimalMcf => Adaptivity::Conscious,
        }
    }

    pub fn is_semi_mcf(self) -> bool {
        self.adaptivity() == Adaptivity::SemiOblivious
    }

    pub fn name(self) -> String {
        match self {
            AlgorithmKind::Spf => "spf".into(),
            AlgorithmKind::Ecmp => "ecmp".into(),
            AlgorithmKind::Ksp => "ksp".into(),
            AlgorithmKind::Vlb => "vlb".into(),
            AlgorithmKind::Raecke => "raecke".into(),
            AlgorithmKind::Mcf => "mcf".into(),
            AlgorithmKind::Mw => "mw".into(),
            AlgorithmKind::SemiMcf(base) => format!("semimcf{}", base.name()),
            AlgorithmKind::SemiMcfMcfEnv => "semimcfmcfenv".into(),
            AlgorithmKind::SemiMcfMcfFtEnv => "semimcfmcfftenv".into(),
            AlgorithmKind::OptimalMcf => "optimalmcf".into(),
        }
    }

    /// Every accepted algorithm name.
    pub fn all() -> Vec<AlgorithmKind> {
        let mut v = vec![
            AlgorithmKind::Spf,
            AlgorithmKind::Ecmp,
            AlgorithmKind::Ksp,
            AlgorithmKind::Vlb,
            AlgorithmKind::Raecke,
            AlgorithmKind::Mcf,
            AlgorithmKind::Mw,
        ];
        v.extend(PathSelector::ALL.iter().map(|b| AlgorithmKind::SemiMcf(*b)));
        v.extend([AlgorithmKind::SemiMcfMcfEnv, AlgorithmKind::SemiMcfMcfFtEnv, AlgorithmKind::OptimalMcf]);
        v
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown algorithm `{name}`; valid names: {valid}")]
pub struct UnknownAlgorithm {
    pub name: String,
    pub valid: String,
}

impl FromStr for AlgorithmKind {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        AlgorithmKind::all().into_iter().find(|k| k.name() == key).ok_or_else(|| UnknownAlgorithm {
            name: s.to_string(),
            valid: AlgorithmKind::all().iter().map(|k| k.name()).collect::<Vec<_>>().join(", "),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in AlgorithmKind::all() {
            assert_eq!(k.name().parse::<AlgorithmKind>().unwrap(), k);
        }
        assert_eq!("SemiMCF-Raecke".parse::<AlgorithmKind>().unwrap(), AlgorithmKind::SemiMcf(PathSelector::Raecke));
        let err = "ospf".parse::<AlgorithmKind>().unwrap_err();
        assert!(err.to_string().contains("semimcfraecke"));
    }

    #[test]
    fn taxonomy() {
        assert_eq!(AlgorithmKind::Raecke.adaptivity(), Adaptivity::Oblivious);
        assert_eq!(AlgorithmKind::SemiMcf(PathSelector::Ksp).adaptivity(), Adaptivity::SemiOblivious);
        assert_eq!(AlgorithmKind::Mcf.adaptivity(), Adaptivity::Conscious);
    }
}
