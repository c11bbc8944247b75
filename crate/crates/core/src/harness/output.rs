use std::fmt::Write as _;
use std::path::Path;

use super::RegretTrace;
use crate::error::{Error, Result};

/// `step,mean_regret,stderr,mean_reward`, one row per checkpoint, floats in
/// scientific notation with 13 significant digits.
pub fn trace_to_csv(trace: &RegretTrace) -> String {
    let mut out = String::from("step,mean_regret,stderr,mean_reward\n");
    for i in 0..trace.steps.len() {
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e}",
            trace.steps[i], trace.mean_regret[i], trace.stderr[i], trace.mean_reward[i]
        )
        .unwrap();
    }
    out
}

pub fn write_trace(trace: &RegretTrace, path: &Path) -> Result<()> {
    std::fs::write(path, trace_to_csv(trace)).map_err(|e| Error::io(path, e))
}

/// `run,seed,final_regret,final_reward`, one row per run.
pub fn runs_to_csv(trace: &RegretTrace) -> String {
    let mut out = String::from("run,seed,final_regret,final_reward\n");
    for (r, seed) in trace.run_seeds.iter().enumerate() {
        writeln!(
            out,
            "{r},{seed},{:.12e},{:.12e}",
            trace.per_run_final[r], trace.per_run_final_reward[r]
        )
        .unwrap();
    }
    out
}

pub fn write_runs(trace: &RegretTrace, path: &Path) -> Result<()> {
    std::fs::write(path, runs_to_csv(trace)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(points: &[(u64, f64, f64, f64)]) -> RegretTrace {
        RegretTrace {
            steps: points.iter().map(|p| p.0).collect(),
            mean_regret: points.iter().map(|p| p.1).collect(),
            stderr: points.iter().map(|p| p.2).collect(),
            mean_reward: points.iter().map(|p| p.3).collect(),
            reward_stderr: vec![0.0; points.len()],
            run_seeds: vec![],
            per_run_final: vec![],
            per_run_final_reward: vec![],
            per_run_regret: vec![],
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(trace_to_csv(&trace(&[])), "step,mean_regret,stderr,mean_reward\n");
    }

    #[test]
    fn one_checkpoint_two_lines() {
        let csv = trace_to_csv(&trace(&[(100, 5.0, 0.1, 60.0)]));
        assert_eq!(
            csv,
            "step,mean_regret,stderr,mean_reward\n100,5.000000000000e0,1.000000000000e-1,6.000000000000e1\n"
        );
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let t = trace(&[(1, 0.123456789012345, 0.0, 1.0), (2, 1.0 / 3.0, 0.01, 2.0)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trace(&t, &p).unwrap();
        let a = std::fs::read(&p).unwrap();
        write_trace(&t, &p).unwrap();
        assert_eq!(a, std::fs::read(&p).unwrap());
        // at least 10 significant digits survive
        let row = String::from_utf8(a).unwrap().lines().nth(1).unwrap().to_string();
        let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 0.123456789012345).abs() < 1e-12);
    }

    #[test]
    fn unwritable_path() {
        assert!(write_trace(&trace(&[]), Path::new("/nonexistent-dir/x/t.csv")).is_err());
    }
}
