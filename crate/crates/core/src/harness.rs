//! Seeded experiment runs and their CSV output.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_inversion_circuit, clamp_instance, CircuitError};
use crate::dynamics::{self, DynamicsError, ModelConfig, SimConfig, Trace};
use crate::embedding::{EmbeddedInstance, EmbeddingError, EmbeddingLayout};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Every setting of a config as `key=value` pairs, defaults included.
pub fn config_pairs(config: &SimConfig) -> Vec<(String, String)> {
    let mut pairs = vec![
        ("epsilon".to_string(), config.epsilon.to_string()),
        ("t_max".into(), config.t_max.to_string()),
        ("dt_initial".into(), config.dt_initial.to_string()),
        ("seed".into(), config.seed.to_string()),
        ("record_every".into(), config.record_every.to_string()),
        ("record_voltages".into(), config.record_voltages.to_string()),
        ("v_cap".into(), config.v_cap.to_string()),
    ];
    match config.model {
        ModelConfig::Memcomputing(p) => pairs.extend([
            ("model".into(), "memcomputing".into()),
            ("alpha".into(), p.alpha.to_string()),
            ("beta".into(), p.beta.to_string()),
            ("gamma".into(), p.gamma.to_string()),
            ("delta".into(), p.delta.to_string()),
            ("mem_epsilon".into(), p.epsilon.to_string()),
            ("zeta".into(), p.zeta.to_string()),
            ("kappa".into(), p.kappa.to_string()),
            ("x_long_scale".into(), p.x_long_scale.to_string()),
            ("dv_max".into(), p.dv_max.to_string()),
            ("dt_min".into(), p.dt_min.to_string()),
        ]),
        ModelConfig::Gradient { gamma, x_cap } => pairs.extend([
            ("model".into(), "gradient".into()),
            ("gamma".into(), gamma.to_string()),
            ("x_cap".into(), x_cap.to_string()),
        ]),
    }
    pairs
}

/// `# key=value` header lines.
pub fn config_echo<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("# {}={}\n", k.as_ref(), v.as_ref()))
        .collect()
}

/// Trace as CSV: `t,C` plus `v<id>` columns when voltages were recorded.
pub fn write_trace_csv<W: Write>(mut out: W, echo: &str, trace: &Trace) -> io::Result<()> {
    out.write_all(echo.as_bytes())?;
    let nodes = trace
        .samples
        .iter()
        .find_map(|s| s.voltages.as_ref().map(Vec::len))
        .unwrap_or(0);
    write!(out, "t,C")?;
    for i in 0..nodes {
        write!(out, ",v{i}")?;
    }
    writeln!(out)?;
    for s in &trace.samples {
        write!(out, "{},{}", s.t, s.c)?;
        if let Some(v) = &s.voltages {
            for x in v {
                write!(out, ",{x}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Size sweep: one scalar inverted with circuits of several widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub a: u64,
    pub c: u64,
    pub sizes: Vec<usize>,
    /// SAT bits per size; `None` uses `n_b = n`.
    pub n_b: Option<usize>,
    pub seeds: Vec<u64>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub n: usize,
    pub seed: u64,
    pub converged: bool,
    pub identity_ok: Option<bool>,
    pub t_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bits: usize,
    pub n_b: usize,
    pub runs: usize,
    /// Runs that converged and decoded to a valid identity.
    pub converged: usize,
    /// Mean and sample standard deviation of `t_c` over converged runs.
    pub mean_t_c: Option<f64>,
    pub stddev_t_c: Option<f64>,
}

impl SweepRow {
    pub fn all_converged(&self) -> bool {
        self.converged == self.runs
    }
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_stddev(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, sd))
}

/// Runs every (size, seed) pair, concurrently, and returns the runs in
/// (size, seed) order with one aggregate row per size.
pub fn run_sweep(spec: &SweepSpec) -> Result<(Vec<SweepRun>, Vec<SweepRow>), HarnessError> {
    let mut jobs = Vec::new();
    for &n in &spec.sizes {
        let layout = EmbeddingLayout::new(n, spec.n_b.unwrap_or(n));
        let instance = EmbeddedInstance::from_ints(spec.a, spec.c, layout)?;
        let netlist = clamp_instance(&build_inversion_circuit(layout)?, &instance)?;
        for &seed in &spec.seeds {
            jobs.push((n, seed, instance.clone(), netlist.clone()));
        }
    }
    let runs = jobs
        .par_iter()
        .map(|(n, seed, instance, netlist)| {
            let config = spec.config.clone().with_seed(*seed);
            let report = dynamics::run(netlist, instance, &config)?.report;
            Ok(SweepRun {
                n: *n,
                seed: *seed,
                converged: report.converged,
                identity_ok: report.identity_ok,
                t_c: report.t_c,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let rows = spec
        .sizes
        .iter()
        .map(|&n| {
            let mine: Vec<_> = runs.iter().filter(|r| r.n == n).collect();
            let ok: Vec<f64> = mine
                .iter()
                .filter(|r| r.converged && r.identity_ok == Some(true))
                .filter_map(|r| r.t_c)
                .collect();
            let stats = mean_stddev(&ok);
            SweepRow {
                bits: n,
                n_b: spec.n_b.unwrap_or(n),
                runs: mine.len(),
                converged: ok.len(),
                mean_t_c: stats.map(|s| s.0),
                stddev_t_c: stats.map(|s| s.1),
            }
        })
        .collect();
    Ok((runs, rows))
}

pub fn write_sweep_csv<W: Write>(mut out: W, echo: &str, rows: &[SweepRow]) -> io::Result<()> {
    out.write_all(echo.as_bytes())?;
    writeln!(out, "bits,n_b,runs,converged,mean_t_c,stddev_t_c,all_converged")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.bits,
            r.n_b,
            r.runs,
            r.converged,
            opt(r.mean_t_c),
            opt(r.stddev_t_c),
            r.all_converged()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TraceSample;

    #[test]
    fn stddev_of_single_value_is_zero() {
        assert_eq!(mean_stddev(&[4.0]), Some((4.0, 0.0)));
        assert_eq!(mean_stddev(&[]), None);
        let (m, s) = mean_stddev(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn echo_lists_every_setting() {
        let echo = config_echo(&config_pairs(&SimConfig::default().with_seed(9)));
        assert!(echo.lines().all(|l| l.starts_with("# ") && l.contains('=')));
        assert!(echo.contains("# seed=9\n"));
        assert!(echo.contains("# epsilon=0.01\n"));
        assert!(echo.contains("# model=memcomputing\n"));
    }

    #[test]
    fn trace_csv_layout() {
        let trace = Trace {
            samples: vec![
                TraceSample {
                    t: 0.0,
                    c: 0.5,
                    voltages: Some(vec![1.0, -0.5]),
                },
                TraceSample {
                    t: 1.5,
                    c: 0.0,
                    voltages: Some(vec![1.0, -1.0]),
                },
            ],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, "# k=v\n", &trace).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# k=v\nt,C,v0,v1\n0,0.5,1,-0.5\n1.5,0,1,-1\n"
        );
    }

    #[test]
    fn single_size_single_seed_sweep() {
        let spec = SweepSpec {
            a: 2,
            c: 1,
            sizes: vec![3],
            n_b: None,
            seeds: vec![0],
            config: SimConfig::default(),
        };
        let (runs, rows) = run_sweep(&spec).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].runs, 1);
        assert_eq!(rows[0].stddev_t_c, Some(0.0));
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, "", &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().ends_with(",true"));
    }
}
