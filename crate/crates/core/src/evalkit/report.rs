use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    cohens_d, cronbach_alpha, five_number_summary, mann_whitney_u, mean, EvalError, FiveNumberSummary, Metric,
    PMethod, QuestionnaireResponse, SessionSummary,
};
use crate::scalar::Scalar;

/// Engagement alpha below this adds a warning; the report is still produced.
pub const ALPHA_WARN_BELOW: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub label: String,
    pub n_responses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow<T: Scalar> {
    pub metric: Metric,
    pub label: String,
    /// U of the first group.
    pub u: T,
    pub u_b: T,
    pub p_value: T,
    pub p_method: PMethod,
    /// Second group minus first over the pooled SD; `None` when undefined.
    pub cohens_d: Option<T>,
    pub mean_a: T,
    pub mean_b: T,
    pub n_a: usize,
    pub n_b: usize,
    pub summary_a: FiveNumberSummary<T>,
    pub summary_b: FiveNumberSummary<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<T: Scalar> {
    pub group_a: GroupInfo,
    pub group_b: GroupInfo,
    pub rows: Vec<MetricRow<T>>,
    /// Over the three engagement items of all responses from both groups.
    pub engagement_alpha: Option<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ComparisonReport<T> {
    pub fn row(&self, metric: Metric) -> Option<&MetricRow<T>> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

struct Group<T> {
    label: String,
    columns: BTreeMap<Metric, Vec<T>>,
    engagement_items: Vec<Vec<T>>,
    n: usize,
}

fn group_label(sessions: &[SessionSummary], fallback: &str) -> String {
    let mut modes = sessions.iter().map(|s| s.mode);
    match modes.next() {
        Some(Some(first)) if modes.all(|m| m == Some(first)) => first.to_string(),
        _ => fallback.to_string(),
    }
}

fn build_group<T: Scalar>(
    responses: &[QuestionnaireResponse],
    sessions: &[SessionSummary],
    fallback: &str,
    warnings: &mut Vec<String>,
) -> Result<Group<T>, EvalError> {
    if responses.len() < 2 {
        return Err(EvalError::InsufficientData(format!(
            "group {fallback} has {} responses; at least 2 required",
            responses.len()
        )));
    }
    let mut by_id = BTreeMap::new();
    for s in sessions {
        if by_id.insert(s.session_id.as_str(), s).is_some() {
            return Err(EvalError::Duplicate { kind: "session record", id: s.session_id.clone() });
        }
    }
    let mut seen = HashSet::new();
    let mut columns: BTreeMap<Metric, Vec<T>> = Metric::ALL.iter().map(|&m| (m, Vec::new())).collect();
    let mut engagement_items = Vec::new();
    for r in responses {
        if !seen.insert(r.session_id.as_str()) {
            return Err(EvalError::Duplicate { kind: "questionnaire response", id: r.session_id.clone() });
        }
        let session = by_id.get(r.session_id.as_str()).ok_or_else(|| EvalError::UnknownSession(r.session_id.clone()))?;
        for m in Metric::ALL {
            let v = match m {
                Metric::NTurn => T::from_count(session.n_turn),
                _ => r.items.score(m).expect("questionnaire metric"),
            };
            columns.get_mut(&m).expect("metric column").push(v);
        }
        engagement_items.push(r.items.engagement_items().iter().map(|&v| T::from_count(v as usize)).collect());
    }
    let unanswered = sessions.iter().filter(|s| !seen.contains(s.session_id.as_str())).count();
    if unanswered > 0 {
        warnings.push(format!("group {fallback}: {unanswered} sessions without a questionnaire were excluded"));
    }
    Ok(Group { label: group_label(sessions, fallback), columns, engagement_items, n: responses.len() })
}

/// Compares two systems metric by metric. `a` is the reference system
/// (baseline); effect sizes are `b − a`.
pub fn compare_systems<T: Scalar>(
    responses_a: &[QuestionnaireResponse],
    responses_b: &[QuestionnaireResponse],
    sessions_a: &[SessionSummary],
    sessions_b: &[SessionSummary],
) -> Result<ComparisonReport<T>, EvalError> {
    let mut warnings = Vec::new();
    let a: Group<T> = build_group(responses_a, sessions_a, "a", &mut warnings)?;
    let b: Group<T> = build_group(responses_b, sessions_b, "b", &mut warnings)?;

    let mut rows = Vec::with_capacity(Metric::ALL.len());
    for m in Metric::ALL {
        let (xa, xb) = (&a.columns[&m], &b.columns[&m]);
        let mw = mann_whitney_u(xa, xb)?;
        let (mean_a, mean_b) = (mean(xa), mean(xb));
        let d = match cohens_d(xb, xa) {
            Ok(d) => Some(d),
            Err(EvalError::ZeroVariance) if mean_a == mean_b => Some(T::zero()),
            Err(EvalError::ZeroVariance) => {
                warnings.push(format!("{}: zero pooled variance with different means; d undefined", m.label()));
                None
            }
            Err(e) => return Err(e),
        };
        rows.push(MetricRow {
            metric: m,
            label: m.label().to_string(),
            u: mw.u,
            u_b: mw.u_b,
            p_value: mw.p,
            p_method: mw.method,
            cohens_d: d,
            mean_a,
            mean_b,
            n_a: xa.len(),
            n_b: xb.len(),
            summary_a: five_number_summary(xa)?,
            summary_b: five_number_summary(xb)?,
        });
    }

    let combined: Vec<Vec<T>> = a.engagement_items.iter().chain(&b.engagement_items).cloned().collect();
    let engagement_alpha = match cronbach_alpha(&combined) {
        Ok(alpha) => {
            if alpha.as_f64() < ALPHA_WARN_BELOW {
                warnings.push(format!("engagement items have low internal consistency (alpha = {:.3})", alpha.as_f64()));
            }
            Some(alpha)
        }
        Err(e) => {
            warnings.push(format!("engagement alpha undefined: {e}"));
            None
        }
    };

    Ok(ComparisonReport {
        group_a: GroupInfo { label: a.label, n_responses: a.n },
        group_b: GroupInfo { label: b.label, n_responses: b.n },
        rows,
        engagement_alpha,
        warnings,
    })
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Plain-text table: Metric, U, p-value, Cohen's d.
pub fn render_table<T: Scalar>(report: &ComparisonReport<T>) -> String {
    let header = ["Metric", "U", "p-value", "Cohen's d"];
    let body: Vec<[String; 4]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                format!("{:.1}", r.u.as_f64()),
                format_p(r.p_value.as_f64()),
                r.cohens_d.map_or_else(|| "n/a".to_string(), |d| format!("{:.3}", d.as_f64())),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: [&str; 4]| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
    };
    line(&mut out, header);
    let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 6));
    for row in &body {
        line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotGroup<T: Scalar> {
    pub label: String,
    #[serde(flatten)]
    pub summary: FiveNumberSummary<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotMetric<T: Scalar> {
    pub metric: Metric,
    pub label: String,
    pub groups: Vec<BoxplotGroup<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotData<T: Scalar> {
    pub metrics: Vec<BoxplotMetric<T>>,
}

/// Five-number summaries per metric and group, for external plotting.
pub fn boxplot_data<T: Scalar>(report: &ComparisonReport<T>) -> BoxplotData<T> {
    BoxplotData {
        metrics: report
            .rows
            .iter()
            .map(|r| BoxplotMetric {
                metric: r.metric,
                label: r.label.clone(),
                groups: vec![
                    BoxplotGroup { label: report.group_a.label.clone(), summary: r.summary_a },
                    BoxplotGroup { label: report.group_b.label.clone(), summary: r.summary_b },
                ],
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::LikertItems;
    use crate::pipeline::SystemMode;

    fn fixture(prefix: &str, mode: SystemMode, rows: &[[i64; 7]], turns: &[usize]) -> (Vec<QuestionnaireResponse>, Vec<SessionSummary>) {
        let responses = rows
            .iter()
            .enumerate()
            .map(|(i, r)| QuestionnaireResponse {
                session_id: format!("{prefix}{i}"),
                items: LikertItems::from_array(*r).unwrap(),
            })
            .collect();
        let sessions = turns
            .iter()
            .enumerate()
            .map(|(i, &n)| SessionSummary { session_id: format!("{prefix}{i}"), mode: Some(mode), n_turn: n })
            .collect();
        (responses, sessions)
    }

    const ROWS: [[i64; 7]; 4] = [[4, 3, 4, 2, 3, 3, 4], [5, 4, 4, 1, 4, 4, 4], [3, 3, 2, 2, 2, 3, 2], [4, 5, 3, 3, 4, 5, 4]];

    #[test]
    fn identical_groups() {
        let (ra, sa) = fixture("a", SystemMode::Baseline, &ROWS, &[5, 7, 4, 6]);
        let (rb, sb) = fixture("b", SystemMode::Emotional, &ROWS, &[5, 7, 4, 6]);
        let report: ComparisonReport<f64> = compare_systems(&ra, &rb, &sa, &sb).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.group_a.label, "baseline");
        assert_eq!(report.group_b.label, "emotional");
        for row in &report.rows {
            assert_eq!(row.cohens_d, Some(0.0), "{}", row.label);
            assert_eq!(row.p_value, 1.0, "{}", row.label);
        }
        let table = render_table(&report);
        assert!(table.starts_with("Metric"));
        assert!(table.contains("Speech Emotion Appropriateness"));
        assert_eq!(table.lines().count(), 8);
    }

    #[test]
    fn mismatched_ids_rejected() {
        let (ra, mut sa) = fixture("a", SystemMode::Baseline, &ROWS, &[5, 7, 4, 6]);
        let (rb, sb) = fixture("b", SystemMode::Emotional, &ROWS, &[5, 7, 4, 6]);
        sa.pop();
        assert!(matches!(compare_systems::<f64>(&ra, &rb, &sa, &sb), Err(EvalError::UnknownSession(_))));
        assert!(matches!(
            compare_systems::<f64>(&ra[..1], &rb, &sa, &sb),
            Err(EvalError::InsufficientData(_))
        ));
    }

    #[test]
    fn constant_but_different_groups_leave_d_undefined() {
        let (ra, sa) = fixture("a", SystemMode::Baseline, &ROWS, &[5, 5, 5, 5]);
        let (rb, sb) = fixture("b", SystemMode::Emotional, &ROWS, &[6, 6, 6, 6]);
        let report: ComparisonReport<f64> = compare_systems(&ra, &rb, &sa, &sb).unwrap();
        assert_eq!(report.row(Metric::NTurn).unwrap().cohens_d, None);
        assert!(report.warnings.iter().any(|w| w.contains("N Turn")));
    }

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(0.0004), "<0.001");
        assert_eq!(format_p(0.58), "0.580");
    }
}
