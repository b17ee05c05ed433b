//! Text formats for topologies and traffic-matrix sequences.
//!
//! Topology files are line oriented:
//!
//! ```text
//! # comment
//! node s1 switch
//! node h1 host
//! link s1 h1 cap=100e9bps weight=0
//! ```
//!
//! A traffic-matrix sequence holds one matrix per line: `n*n` space-separated
//! rates in row-major order over the hosts sorted by name.

use std::fmt::Write as _;
use std::path::Path as FsPath;

use super::topology::{NodeKind, Topology, TopologyBuilder};
use super::traffic::TrafficMatrix;
use crate::error::ParseError;

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, message: message.into() }
}

/// Parses `<float>` with an optional `bps`, `Kbps`, `Mbps`, `Gbps` or
/// `Tbps` suffix.
fn parse_rate(s: &str) -> Option<f64> {
    let units = [("Tbps", 1e12), ("Gbps", 1e9), ("Mbps", 1e6), ("Kbps", 1e3), ("kbps", 1e3), ("bps", 1.0)];
    for (suffix, mult) in units {
        if let Some(num) = s.strip_suffix(suffix) {
            return num.parse::<f64>().ok().map(|v| v * mult);
        }
    }
    s.parse().ok()
}

pub fn parse_topology(name: &str, text: &str) -> Result<Topology, ParseError> {
    let mut b = TopologyBuilder::new(name);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "node" => {
                if fields.len() != 3 {
                    return Err(syntax(line_no, "expected `node <name> host|switch`"));
                }
                let kind = match fields[2] {
                    "host" => NodeKind::Host,
                    "switch" => NodeKind::Switch,
                    other => return Err(syntax(line_no, format!("unknown node kind `{other}`"))),
                };
                b.add_node(fields[1], kind);
            }
            "link" => {
                if !(4..=5).contains(&fields.len()) {
                    return Err(syntax(line_no, "expected `link <a> <b> cap=<float>bps [weight=<float>]`"));
                }
                let mut cap = None;
                let mut weight = 1.0;
                for attr in &fields[3..] {
                    if let Some(v) = attr.strip_prefix("cap=") {
                        cap = Some(parse_rate(v).ok_or_else(|| syntax(line_no, format!("bad capacity `{v}`")))?);
                    } else if let Some(v) = attr.strip_prefix("weight=") {
                        weight = v.parse().map_err(|_| syntax(line_no, format!("bad weight `{v}`")))?;
                    } else {
                        return Err(syntax(line_no, format!("unknown attribute `{attr}`")));
                    }
                }
                let cap = cap.ok_or_else(|| syntax(line_no, "missing cap="))?;
                b.add_link(fields[1], fields[2], cap, weight);
            }
            other => return Err(syntax(line_no, format!("unknown directive `{other}`"))),
        }
    }
    Ok(b.build()?)
}

/// Reads a topology file; the topology is named after the file stem.
pub fn read_topology(path: impl AsRef<FsPath>) -> Result<Topology, ParseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ParseError::Io(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("topology");
    parse_topology(name, &text)
}

pub fn parse_tm_sequence(topo: &Topology, text: &str) -> Result<Vec<TrafficMatrix>, ParseError> {
    let hosts = topo.hosts();
    let n = hosts.len();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rates = line
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| syntax(i + 1, format!("bad rate `{v}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if rates.len() != n * n {
            return Err(syntax(i + 1, format!("expected {} values for {n} hosts, found {}", n * n, rates.len())));
        }
        let tm = TrafficMatrix::from_dense(hosts, rates)
            .ok_or_else(|| syntax(i + 1, "rates must be finite and nonnegative"))?;
        out.push(tm);
    }
    Ok(out)
}

pub fn read_tm_sequence(topo: &Topology, path: impl AsRef<FsPath>) -> Result<Vec<TrafficMatrix>, ParseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ParseError::Io(format!("{}: {e}", path.display())))?;
    parse_tm_sequence(topo, &text)
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn write_tm_sequence(tms: &[TrafficMatrix]) -> String {
    let mut out = String::new();
    for tm in tms {
        for (i, r) in tm.dense().iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{r}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "\
# triangle
node x switch
node y switch
node z switch
node hx host
node hz host
link x y cap=10Gbps weight=1
link y z cap=10e9bps
link x z cap=1e9bps weight=3
link hx x cap=100Gbps weight=0
link hz z cap=100Gbps weight=0
";

    #[test]
    fn parses_topology() {
        let t = parse_topology("tri", TRI).unwrap();
        assert_eq!(t.node_count(), 5);
        assert_eq!(t.link_count(), 5);
        assert_eq!(t.hosts().len(), 2);
        assert_eq!(t.link_capacity(crate::model::LinkId(0)), 1e10);
        let reparsed = parse_topology("tri", &t.to_string()).unwrap();
        assert_eq!(reparsed, t);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_topology("bad", "node a switch\nlink a b cap=x\n").unwrap_err();
        assert_eq!(err, ParseError::Syntax { line: 2, message: "bad capacity `x`".into() });
        let err = parse_topology("bad", "node a router\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }));
    }

    #[test]
    fn tm_round_trip() {
        let t = parse_topology("tri", TRI).unwrap();
        let tm = TrafficMatrix::from_dense(t.hosts(), vec![0.0, 0.1 + 0.2, 1.0 / 3.0, 0.0]).unwrap();
        let text = write_tm_sequence(&[tm.clone(), tm.scaled(7.0)]);
        let back = parse_tm_sequence(&t, &text).unwrap();
        assert_eq!(back, vec![tm.clone(), tm.scaled(7.0)]);
        assert!(parse_tm_sequence(&t, "1 2 3\n").is_err());
    }
}
