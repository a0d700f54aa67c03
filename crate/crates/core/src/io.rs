//! Text formats: topology JSON, newline-delimited vectors and instance
//! JSON. Parsers return errors for every malformed input and never panic.
//!
//! Topology: `{"n": 7, "d": 2, "parent": [null, 0, 0, 1, 1, 2, 2]}`.
//!
//! Instance: a header `n`, `N`, `k`, `d`, `sigma`, `seed`, then the
//! parent array, `A` as an array of `n` rows, and the vectors `x_star`,
//! `noise_e` and `b`. `b` is checked against `A x_star + noise_e`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::ProblemInstance;
use crate::tree::TreeTopology;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    n: usize,
    d: usize,
    parent: Vec<Option<usize>>,
}

fn topology_from_parts(n: usize, d: usize, parent: Vec<Option<usize>>) -> Result<TreeTopology> {
    if parent.len() != n {
        return Err(Error::Parse(format!(
            "topology declares n = {n} but lists {} parents",
            parent.len()
        )));
    }
    TreeTopology::from_parents(d, parent)
}

pub fn parse_topology(text: &str) -> Result<TreeTopology> {
    let file: TopologyFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("topology: {e}")))?;
    topology_from_parts(file.n, file.d, file.parent)
}

pub fn topology_to_json(topology: &TreeTopology) -> String {
    let file = TopologyFile {
        n: topology.n_nodes(),
        d: topology.order(),
        parent: topology.parents().to_vec(),
    };
    serde_json::to_string(&file).expect("plain data serialises")
}

/// One finite decimal per line; blank lines and `#` comments are skipped.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: not a number: {line:?}", lineno + 1)))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!(
                "line {}: value is not finite",
                lineno + 1
            )));
        }
        out.push(v);
    }
    Ok(out)
}

/// Shortest round-tripping decimal per line.
pub fn vector_to_text(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 20);
    for x in v {
        s.push_str(&format!("{x}\n"));
    }
    s
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    #[serde(rename = "N")]
    n_signal: usize,
    k: usize,
    d: usize,
    sigma: f64,
    seed: u64,
    parent: Vec<Option<usize>>,
    matrix: Vec<Vec<f64>>,
    x_star: Vec<f64>,
    noise_e: Vec<f64>,
    b: Vec<f64>,
}

pub fn instance_to_json(inst: &ProblemInstance) -> String {
    let file = InstanceFile {
        n: inst.n(),
        n_signal: inst.n_signal(),
        k: inst.k,
        d: inst.topology.order(),
        sigma: inst.sigma,
        seed: inst.seed,
        parent: inst.topology.parents().to_vec(),
        matrix: inst
            .matrix_a
            .row_iter()
            .map(|r| r.iter().cloned().collect())
            .collect(),
        x_star: inst.x_star.as_slice().to_vec(),
        noise_e: inst.noise_e.as_slice().to_vec(),
        b: inst.b.as_slice().to_vec(),
    };
    serde_json::to_string(&file).expect("plain data serialises")
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Parse(format!(
            "{what} has length {got}, expected {want}"
        )))
    }
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let f: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance: {e}")))?;
    if f.n == 0 {
        return Err(Error::Parse("instance needs n >= 1".into()));
    }
    if !(f.sigma >= 0.0 && f.sigma.is_finite()) {
        return Err(Error::Parse(format!(
            "sigma must be finite and non-negative, got {}",
            f.sigma
        )));
    }
    let topology = topology_from_parts(f.n_signal, f.d, f.parent)?;
    if f.k == 0 || f.k > f.n_signal {
        return Err(Error::InfeasibleSparsity {
            k: f.k,
            n_nodes: f.n_signal,
        });
    }
    check_len("matrix", f.matrix.len(), f.n)?;
    for (i, row) in f.matrix.iter().enumerate() {
        check_len(&format!("matrix row {i}"), row.len(), f.n_signal)?;
    }
    check_len("x_star", f.x_star.len(), f.n_signal)?;
    check_len("noise_e", f.noise_e.len(), f.n)?;
    check_len("b", f.b.len(), f.n)?;
    let all_finite = f
        .matrix
        .iter()
        .flatten()
        .chain(&f.x_star)
        .chain(&f.noise_e)
        .chain(&f.b);
    if all_finite.clone().any(|v| !v.is_finite()) {
        return Err(Error::Parse("instance holds a non-finite value".into()));
    }

    let flat: Vec<f64> = f.matrix.into_iter().flatten().collect();
    let a = DMatrix::from_row_slice(f.n, f.n_signal, &flat);
    let inst = ProblemInstance::assemble(
        a,
        DVector::from_vec(f.x_star),
        DVector::from_vec(f.noise_e),
        f.sigma,
        topology,
        f.k,
        f.seed,
    )?;
    let stored = DVector::from_vec(f.b);
    let gap = (&stored - &inst.b).norm();
    if !(gap <= 1e-9 * (1.0 + stored.norm())) {
        return Err(Error::Parse(format!(
            "b disagrees with A x_star + noise_e (gap {gap:e})"
        )));
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{CoeffLaw, InstanceSpec};
    use crate::tree::build_complete_tree;

    #[test]
    fn topology_round_trip() {
        let t = build_complete_tree(7, 2).unwrap();
        let s = topology_to_json(&t);
        assert_eq!(s, r#"{"n":7,"d":2,"parent":[null,0,0,1,1,2,2]}"#);
        assert_eq!(parse_topology(&s).unwrap(), t);
    }

    #[test]
    fn topology_rejects() {
        for bad in [
            "",
            "{}",
            r#"{"n":2,"d":2,"parent":[null]}"#,
            r#"{"n":2,"d":2,"parent":[null,5]}"#,
            r#"{"n":2,"d":1,"parent":[null,0]}"#,
            r#"{"n":2,"d":2,"parent":[1,0]}"#,
            r#"{"n":1,"d":2,"parent":[null],"x":1}"#,
            r#"{"n":-1,"d":2,"parent":[]}"#,
        ] {
            assert!(parse_topology(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn vector_round_trip() {
        let v = vec![1.0, -0.1, 1e-300, 123456.789, 0.0];
        assert_eq!(parse_vector(&vector_to_text(&v)).unwrap(), v);
        assert_eq!(parse_vector("# c\n\n 2.5 \n").unwrap(), vec![2.5]);
        assert!(parse_vector("1\nx\n").is_err());
        assert!(parse_vector("inf\n").is_err());
        assert!(parse_vector("NaN").is_err());
    }

    #[test]
    fn instance_round_trip() {
        let inst = ProblemInstance::generate(&InstanceSpec {
            n: 12,
            topology: build_complete_tree(31, 2).unwrap(),
            k: 3,
            sigma: 0.2,
            law: CoeffLaw::UnitGaussian,
            seed: 4,
        })
        .unwrap();
        let s = instance_to_json(&inst);
        assert_eq!(parse_instance(&s).unwrap(), inst);
    }

    #[test]
    fn instance_rejects_inconsistent_b() {
        let t = build_complete_tree(3, 2).unwrap();
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let inst = ProblemInstance::assemble(
            a,
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::zeros(1),
            0.0,
            t,
            2,
            0,
        )
        .unwrap();
        let good = instance_to_json(&inst);
        assert!(parse_instance(&good).is_ok());
        let bad = good.replace(r#""b":[3.0]"#, r#""b":[4.0]"#);
        assert_ne!(bad, good);
        assert!(parse_instance(&bad).is_err());
        assert!(parse_instance(&good.replace(r#""k":2"#, r#""k":9"#)).is_err());
        assert!(parse_instance(&good.replace(r#""n":1"#, r#""n":2"#)).is_err());
    }
}
