//! Topologies shipped with the crate.

use crate::model::io::parse_topology;
use crate::model::Topology;

const ABILENE: &str = include_str!("../topologies/abilene.topo");
const NSFNET: &str = include_str!("../topologies/nsfnet.topo");
const RING6: &str = include_str!("../topologies/ring6.topo");

pub const NAMES: [&str; 3] = ["abilene", "nsfnet", "ring6"];

/// Looks up a bundled topology by name.
pub fn topology(name: &str) -> Option<Topology> {
    let text = match name {
        "abilene" => ABILENE,
        "nsfnet" => NSFNET,
        "ring6" => RING6,
        _ => return None,
    };
    Some(parse_topology(name, text).expect("bundled topology is valid"))
}

pub fn abilene() -> Topology {
    topology("abilene").unwrap()
}

pub fn nsfnet() -> Topology {
    topology("nsfnet").unwrap()
}

pub fn ring6() -> Topology {
    topology("ring6").unwrap()
}

pub fn all() -> Vec<Topology> {
    NAMES.iter().map(|n| topology(n).unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let a = abilene();
        assert_eq!(a.switches().len(), 12);
        assert_eq!(a.core_links().count(), 15);
        assert_eq!(a.hosts().len(), 12);
        let n = nsfnet();
        assert_eq!(n.switches().len(), 14);
        assert_eq!(n.core_links().count(), 21);
        let r = ring6();
        assert_eq!(r.core_links().count(), 7);
    }
}
