//! CSV, SVG and trace emission.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::energy::{Constituent, SubCategory};
use crate::experiment::{CompareReport, SweepOutcome};
use crate::sim::SimResult;

pub const LEDGER_HEADER: &str = "node_id,constituent,subcategory,joules";
pub const SUMMARY_HEADER: &str =
    "node_id,lifetime_s,censored,individual_j,local_j,global_j,sink_j,environment_j,b_individual,b_local,b_global";
pub const SWEEP_HEADER: &str = "policy,param,param_value,seed,lifetime_s,censored,total_j";
pub const COMPARE_HEADER: &str =
    "seed,random_lifetime_s,random_censored,selective_lifetime_s,selective_censored,b_individual_r,b_individual_s,b_local_r,b_local_s,b_global_r,b_global_s";

/// Format like C's `%.9g`.
pub fn fmt_num(x: f64) -> String {
    const PRECISION: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Every ledger cell of every node, sub-categories in canonical order.
pub fn ledger_csv(result: &SimResult) -> String {
    let mut out = String::from(LEDGER_HEADER);
    out.push('\n');
    for (i, ledger) in result.ledgers.iter().enumerate() {
        for sub in SubCategory::ALL {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                i,
                sub.constituent(),
                sub,
                fmt_num(ledger.get(sub))
            );
        }
    }
    out
}

pub fn summary_csv(result: &SimResult) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (i, ledger) in result.ledgers.iter().enumerate() {
        let (lifetime, censored) = result.node_lifetime(crate::node::NodeId(i as u32));
        let c = result.packet_counts[i];
        let _ = write!(out, "{},{},{}", i, fmt_num(lifetime), flag(censored));
        for constituent in Constituent::ALL {
            let _ = write!(out, ",{}", fmt_num(ledger.constituent_total(constituent)));
        }
        let _ = writeln!(out, ",{},{},{}", c.individual, c.local, c.global);
    }
    out
}

pub fn sweep_csv(outcome: &SweepOutcome) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in &outcome.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.policy.name(),
            outcome.spec.param.name(),
            fmt_num(row.param_value),
            row.seed,
            fmt_num(row.lifetime),
            flag(row.censored),
            fmt_num(row.total_j())
        );
    }
    out
}

pub fn compare_csv(report: &CompareReport) -> String {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for p in &report.pairs {
        let (r, s) = (&p.random, &p.selective);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.seed,
            fmt_num(r.lifetime),
            flag(r.censored),
            fmt_num(s.lifetime),
            flag(s.censored),
            r.counts.individual,
            s.counts.individual,
            r.counts.local,
            s.counts.local,
            r.counts.global,
            s.counts.global
        );
    }
    out
}

/// Human-readable key/value digest of a comparison.
pub fn compare_summary_text(report: &CompareReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seeds\t{}", report.pairs.len());
    for (name, stats) in [("random", &report.random), ("selective", &report.selective)] {
        let _ = writeln!(out, "{name}_mean_lifetime_s\t{}", fmt_num(stats.mean_lifetime));
        let _ = writeln!(out, "{name}_median_lifetime_s\t{}", fmt_num(stats.median_lifetime));
        let _ = writeln!(out, "{name}_censored\t{}", stats.censored);
    }
    let _ = writeln!(out, "selective_win_rate\t{}", fmt_num(report.selective_win_rate));
    let _ = writeln!(out, "global_r_gt_s_rate\t{}", fmt_num(report.global_rate));
    let _ = writeln!(out, "local_r_lt_s_rate\t{}", fmt_num(report.local_rate));
    let _ = writeln!(out, "individual_r_lt_s_rate\t{}", fmt_num(report.individual_rate));
    out
}

/// Mean lifetime per grid point, one polyline per policy.
pub fn sweep_svg(outcome: &SweepOutcome) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    const COLORS: [&str; 2] = ["#c0392b", "#2471a3"];
    let (x0, x1) = (outcome.spec.min, outcome.spec.max);
    let ymax = outcome
        .points
        .iter()
        .map(|p| p.mean_lifetime)
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - y / ymax * (H - 2.0 * M);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<polyline points="{M},{M} {M},{b} {r},{b}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{} (m)</text>"#,
        W / 2.0,
        H - 15.0,
        outcome.spec.param.name()
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">mean lifetime (s)</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="{anchor}">{}</text>"#,
            sx(x),
            H - M + 16.0,
            fmt_num(x)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, M + 4.0, fmt_num(ymax));
    for (k, policy) in outcome.policies.iter().enumerate() {
        let pts: Vec<String> = outcome
            .points
            .iter()
            .filter(|p| p.policy == *policy)
            .map(|p| format!("{:.2},{:.2}", sx(p.param_value), sy(p.mean_lifetime)))
            .collect();
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - M - 80.0,
            M + 16.0 * k as f64,
            policy.name()
        );
    }
    out.push_str("</svg>\n");
    out
}
