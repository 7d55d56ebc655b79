//! CSV and JSON emission of solve and verify reports.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bifunction::{run_condition, ConditionReport};
use crate::catalog::ProblemInstance;
use crate::error::Result;
use crate::geometry::Scalar;
use crate::solver::{verify_theorem_instance, ProblemKind, SolveReport, SolverConfig, TheoremReport};
use crate::verdict::Verdict;

/// `v` rounded to 12 significant digits, printed in its shortest form.
pub fn sig12(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    // avoid "-0"
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

/// Header `index,x_1..x_n,membership_residual,min_f,gap,status`, one row
/// per solution or flagged point in lexicographic order. `gap` is empty
/// except for QOpt runs.
pub fn write_csv(report: &SolveReport, dim: usize, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    header.extend(["membership_residual", "min_f", "gap", "status"].map(String::from));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(sig12).unwrap_or_default();
    for row in &report.rows {
        let mut rec = vec![row.index.to_string()];
        rec.extend(row.point.iter().map(|v| sig12(*v)));
        rec.push(sig12(row.membership_residual));
        rec.push(opt(row.min_f));
        rec.push(if report.problem_kind == ProblemKind::Qopt {
            opt(row.gap)
        } else {
            String::new()
        });
        rec.push(row.status.as_str().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(report: &SolveReport, dim: usize) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(report, dim, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn solve_report_from_json(text: &str) -> Result<SolveReport> {
    Ok(serde_json::from_str(text)?)
}

/// Every selected checker on `f`, then the theorem-instance verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct VerifyReport<S: Scalar = f64> {
    pub instance: String,
    /// Condition and probe verdicts by name.
    pub verdicts: BTreeMap<String, Verdict>,
    pub conditions: Vec<ConditionReport<S>>,
    pub theorem: TheoremReport<S>,
}

impl<S: Scalar> VerifyReport<S> {
    pub fn anomaly(&self) -> bool {
        self.theorem.anomaly
    }
}

pub fn verify_instance<S: Scalar>(instance: &ProblemInstance<S>, cfg: &SolverConfig) -> Result<VerifyReport<S>> {
    let f = instance.bifunction()?;
    let conditions = instance
        .checks
        .conditions
        .iter()
        .map(|id| run_condition(*id, &f, &cfg.grid, &instance.checks))
        .collect::<Result<Vec<_>>>()?;
    let theorem = verify_theorem_instance(instance, cfg)?;
    let mut verdicts: BTreeMap<String, Verdict> = theorem
        .verdicts()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    verdicts.extend(
        conditions
            .iter()
            .map(|c| (c.condition_id.name().to_string(), c.verdict)),
    );
    Ok(VerifyReport {
        instance: instance.name.clone(),
        verdicts,
        conditions,
        theorem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{figure1_instance, quasiconvex_variant_instance};
    use crate::solver::{solve_qep, solve_qopt};
    use crate::Payload;

    #[test]
    fn significant_digits() {
        assert_eq!(sig12(0.1), "0.1");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(-0.0), "0");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(2.0 / 3.0 * 1e-5), "0.00000666666666667");
        assert_eq!(sig12(123456789.123_456_7), "123456789.123");
    }

    #[test]
    fn csv_layout() {
        let inst = quasiconvex_variant_instance();
        let cfg = inst.solver_config().unwrap();
        let Payload::Objective(h) = &inst.payload else { panic!() };
        let report = solve_qopt(h, &inst.map, &cfg).unwrap();
        assert_eq!(
            csv_string(&report, 1).unwrap(),
            "index,x_1,membership_residual,min_f,gap,status\n1000,1,0,0,0,solution\n"
        );
        let report = solve_qep(&inst.bifunction().unwrap(), &inst.map, &cfg).unwrap();
        assert_eq!(
            csv_string(&report, 1).unwrap().lines().nth(1),
            Some("1000,1,0,0,,solution")
        );
        let fig = figure1_instance();
        let Payload::Objective(h) = &fig.payload else { panic!() };
        let empty = solve_qopt(h, &fig.map, &fig.solver_config().unwrap()).unwrap();
        assert_eq!(
            csv_string(&empty, 1).unwrap(),
            "index,x_1,membership_residual,min_f,gap,status\n"
        );
    }

    #[test]
    fn json_round_trip() {
        let fig = figure1_instance();
        let cfg = fig.solver_config().unwrap().with_eps(0.15).unwrap();
        let Payload::Objective(h) = &fig.payload else { panic!() };
        let report = solve_qopt(h, &fig.map, &cfg).unwrap();
        assert!(report.solution_count() > 0);
        let text = to_json(&report).unwrap();
        let back = solve_report_from_json(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(to_json(&back).unwrap(), text);
    }
}
