use std::fs;
use std::path::Path;

use super::{IoError, ParseError};
use crate::harness::{AgreementReport, CampaignResult, SceneResult, SceneStatus};
use crate::stats::Criterion;

pub const AGGREGATE_HEADER: [&str; 17] = [
    "mr",
    "scenes",
    "evaluated",
    "skipped",
    "errored",
    "wvc_pct",
    "bade_pct",
    "bfde_pct",
    "made_pct",
    "mfde_pct",
    "hvc_mean",
    "hvc_std",
    "hvc_pct",
    "htc_pct",
    "intersection_pct",
    "blocked_intersection_pct",
    "source_intersection_pct",
];

pub const SCENES_HEADER: [&str; 29] = [
    "scene_id",
    "mr",
    "status",
    "detail",
    "wvc_rate",
    "wvc_mean_distance",
    "wvc_baseline_mu",
    "wvc_baseline_sigma",
    "hvc_mean",
    "hvc_rate",
    "htc_expected",
    "htc_p",
    "htc_mass_shift",
    "htc_expectation_met",
    "intersection",
    "blocked_intersection",
    "source_intersection",
    "bade_source",
    "bade_follow_up",
    "bade_p",
    "bfde_source",
    "bfde_follow_up",
    "bfde_p",
    "made_source",
    "made_follow_up",
    "made_p",
    "mfde_source",
    "mfde_follow_up",
    "mfde_p",
];

pub const AGREEMENT_HEADER: [&str; 9] = [
    "label",
    "threshold",
    "tp",
    "fp",
    "fn",
    "tn",
    "accuracy",
    "precision",
    "recall",
];

/// `%g` with 6 significant digits: fixed notation for decimal exponents in
/// `[-4, 6)`, scientific otherwise, trailing zeros removed.
pub fn fmt_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // round first, then read the exponent of the rounded value
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_g).unwrap_or_default()
}

fn pct(v: Option<f64>) -> String {
    opt(v.map(|r| 100.0 * r))
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in rows {
        debug_assert_eq!(r.len(), N);
        w.write_record(r).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

pub fn write_aggregate_csv(campaign: &CampaignResult) -> Vec<u8> {
    let rows = campaign
        .aggregates
        .iter()
        .map(|a| {
            vec![
                a.mr.clone(),
                a.scenes.to_string(),
                a.evaluated.to_string(),
                a.skipped.to_string(),
                a.errored.to_string(),
                pct(a.wvc_rate),
                pct(a.bon_ade_rate),
                pct(a.bon_fde_rate),
                pct(a.mean_ade_rate),
                pct(a.mean_fde_rate),
                opt(a.hvc_mean),
                opt(a.hvc_std),
                pct(a.hvc_rate),
                pct(a.htc_rate),
                pct(a.intersection_mean),
                pct(a.blocked_intersection_mean),
                pct(a.source_intersection_mean),
            ]
        })
        .collect();
    csv_bytes(AGGREGATE_HEADER, rows)
}

fn scene_row(r: &SceneResult) -> Vec<String> {
    let (status, detail) = match &r.status {
        SceneStatus::Ok => ("ok", String::new()),
        SceneStatus::Skipped { reason } => ("skipped", reason.clone()),
        SceneStatus::Errored { stage, message, .. } => (
            "errored",
            format!(
                "{}: {message}",
                serde_json::to_value(stage)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default()
            ),
        ),
    };
    let mut row = vec![r.scene_id.clone(), r.mr.label(), status.into(), detail];
    let w = r.wvc.as_ref();
    row.push(opt(w.map(|w| w.violation_rate)));
    row.push(opt(w.map(|w| w.mean_distance)));
    row.push(opt(w.map(|w| w.baseline.mu)));
    row.push(opt(w.map(|w| w.baseline.sigma)));
    row.push(opt(r.hvc.as_ref().map(|h| h.mean_distance)));
    row.push(opt(r.hvc.as_ref().map(|h| h.violation_rate)));
    let h = r.htc.as_ref();
    row.push(
        h.and_then(|h| serde_json::to_value(h.expected).ok())
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
    );
    row.push(opt(h.map(|h| h.outcome.verdict.p_value)));
    row.push(opt(h.map(|h| h.outcome.verdict.distance)));
    row.push(h.map(|h| h.expectation_met.to_string()).unwrap_or_default());
    let i = r.intersection.as_ref();
    row.push(opt(i.map(|i| i.follow_up_roi)));
    row.push(opt(i.map(|i| i.follow_up_blocked)));
    row.push(opt(i.map(|i| i.source_roi)));
    let d = r.displacement.as_ref();
    for (c, src) in [
        (
            Criterion::BonAde,
            (|a| a.bon_ade) as fn(&crate::metrics::AdeFde) -> f64,
        ),
        (Criterion::BonFde, |a| a.bon_fde),
        (Criterion::MeanAde, |a| a.mean_ade),
        (Criterion::MeanFde, |a| a.mean_fde),
    ] {
        row.push(opt(d.map(|d| src(&d.source_mean))));
        row.push(opt(d.map(|d| src(&d.follow_up))));
        row.push(opt(d.and_then(|d| d.verdict(c)).map(|v| v.p_value)));
    }
    row
}

pub fn write_scenes_csv(campaign: &CampaignResult) -> Vec<u8> {
    csv_bytes(
        SCENES_HEADER,
        campaign.results.iter().map(scene_row).collect(),
    )
}

pub fn write_agreement_csv(report: &AgreementReport) -> Vec<u8> {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let label = match r.label {
                Criterion::MeanAde => "mean_ade",
                Criterion::MeanFde => "mean_fde",
                _ => "other",
            };
            vec![
                label.into(),
                fmt_g(r.threshold),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                r.tn.to_string(),
                fmt_g(r.accuracy),
                fmt_g(r.precision),
                fmt_g(r.recall),
            ]
        })
        .collect();
    csv_bytes(AGREEMENT_HEADER, rows)
}

fn put(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Writes `aggregate.csv`, `scenes.csv`, `results.json` and, when given,
/// `agreement.csv` into `dir`.
pub fn write_reports(
    dir: &Path,
    campaign: &CampaignResult,
    agreement: Option<&AgreementReport>,
) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    put(&dir.join("aggregate.csv"), &write_aggregate_csv(campaign))?;
    put(&dir.join("scenes.csv"), &write_scenes_csv(campaign))?;
    let mut json = serde_json::to_vec_pretty(campaign).expect("results serialize");
    json.push(b'\n');
    put(&dir.join("results.json"), &json)?;
    if let Some(a) = agreement {
        put(&dir.join("agreement.csv"), &write_agreement_csv(a))?;
    }
    Ok(())
}

pub fn read_results(path: &Path) -> Result<CampaignResult, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| IoError::parse(path, ParseError::at_line(e.line() as u64, e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_printf() {
        // expected strings are C printf("%g") output
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.05, "0.05"),
            (100.0, "100"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (0.00001, "1e-05"),
            (0.000123456789, "0.000123457"),
            (-2.5, "-2.5"),
            (1.23456789, "1.23457"),
            (1e-300, "1e-300"),
            (1.5e100, "1.5e+100"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_g(v), s, "{v}");
        }
    }
}
