//! CSV and JSON renderings of sequence runs.

use std::fmt::Write as _;

use serde::Serialize;

use crate::fem::ProblemKind;
use crate::reuse::{ConsistencyReport, CostModelFit, GridReport, SequenceRun, SolveMode};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str =
    "schema_version,l,mode,N,flops_new,flops_back,nnz_new,peak_front,wall_time_ns,error_L2,error_H1";
/// How flops are counted, repeated in every report.
pub const FLOP_CONVENTION: &str = "1 per divide, multiply, add or subtract; unsymmetric LU; rhs updates included";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeTotals {
    pub mode: SolveMode,
    pub forward_flops: u64,
    pub back_flops: u64,
    pub nnz: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub schema_version: u32,
    pub problem: ProblemKind,
    pub p: usize,
    pub levels: usize,
    pub alpha: f64,
    pub flop_convention: &'static str,
    pub rows: Vec<GridReport>,
    pub fit: CostModelFit,
    pub totals: Vec<ModeTotals>,
    /// Present when all three modes ran.
    pub consistency: Option<ConsistencyReport>,
}

impl SequenceReport {
    pub fn new(
        problem: ProblemKind,
        p: usize,
        levels: usize,
        alpha: f64,
        runs: &[SequenceRun],
        consistency: Option<ConsistencyReport>,
    ) -> Self {
        let find = |m: SolveMode| runs.iter().find(|r| r.mode == m).map(|r| r.reports.as_slice());
        let fit = CostModelFit::from_reports(find(SolveMode::NoReuse), find(SolveMode::Reuse));
        let totals = runs
            .iter()
            .map(|r| ModeTotals {
                mode: r.mode,
                forward_flops: r.reports.iter().map(|g| g.flops_new).sum(),
                back_flops: r.reports.iter().map(|g| g.flops_back).sum(),
                nnz: r.reports.iter().map(|g| g.nnz_new).sum(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            problem,
            p,
            levels,
            alpha,
            flop_convention: FLOP_CONVENTION,
            rows: runs.iter().flat_map(|r| r.reports.iter().cloned()).collect(),
            fit,
            totals,
            consistency,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.schema_version,
                r.l,
                r.mode,
                r.n_dofs,
                r.flops_new,
                r.flops_back,
                r.nnz_new,
                r.peak_front,
                r.wall_time_ns,
                opt(r.error_l2),
                opt(r.error_h1)
            );
        }
        let _ = writeln!(out, "# problem={} p={} levels={} alpha={}", self.problem, self.p, self.levels, self.alpha);
        let _ = writeln!(out, "# flops: {}", self.flop_convention);
        let f = &self.fit;
        let fields = [
            ("c1", f.c1),
            ("c2", f.c2),
            ("r2_cost", f.r2_cost),
            ("c3", f.c3),
            ("c4", f.c4),
            ("r2_unknowns", f.r2_unknowns),
            ("c5", f.c5),
            ("c6", f.c6),
            ("r2_memory", f.r2_memory),
            ("c7", f.c7),
            ("c7_spread", f.c7_spread),
        ];
        for (name, v) in fields {
            let _ = writeln!(out, "# {name}={}", v.map(|x| format!("{x:e}")).unwrap_or_else(|| "NA".into()));
        }
        for t in &self.totals {
            let _ = writeln!(
                out,
                "# total[{}] forward_flops={} back_flops={} nnz={}",
                t.mode, t.forward_flops, t.back_flops, t.nnz
            );
        }
        if let Some(c) = &self.consistency {
            let _ = writeln!(out, "# consistent={}", c.consistent);
            if let Some(l) = c.first_failure {
                let _ = writeln!(out, "# first_inconsistent_grid={l}");
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
