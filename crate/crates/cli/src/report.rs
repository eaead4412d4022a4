use std::fmt::Write;

use fairaudit_core::{AuditResult, CorpusStats, FaasStatus};

fn p_value(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn faas_text(result: &AuditResult) -> String {
    match (result.faas_status, result.faas) {
        (FaasStatus::Defined, Some(v)) => format!("{v:.2}"),
        (FaasStatus::PerfectAccuracy, _) => "undefined (perfect accuracy, ranks first)".into(),
        _ => "-inf (zero fairness score)".into(),
    }
}

/// Human-readable audit summary.
pub fn audit_summary(result: &AuditResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model       {}", result.model_id);
    let _ = writeln!(
        out,
        "utterances  {} (coverage {:.1}%)",
        result.n_utterances,
        100.0 * result.coverage
    );
    let _ = writeln!(out, "WER         {:.4}", result.wer);
    let _ = writeln!(out, "overall     {:.2}", result.overall_score);
    let _ = writeln!(out, "FAAS        {}", faas_text(result));
    let _ = writeln!(out, "tier        {}", result.tier);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<18} {:<14} {:>8} {:>10} {:>9}  tier",
        "category", "reference", "score", "p-value", "adjusted"
    );
    for c in &result.categories {
        let _ = writeln!(
            out,
            "{:<18} {:<14} {:>8.2} {:>10} {:>9.2}  {}",
            c.attribute.as_str(),
            c.reference_level,
            c.category_score,
            p_value(c.lrt.p_value),
            c.adjusted_score,
            c.tier
        );
    }
    for c in &result.categories {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<18} {:>6} {:>8} {:>10} {:>10} {:>7}",
            c.attribute.as_str(),
            "n",
            "share",
            "observed",
            "predicted",
            "raw"
        );
        for g in &c.groups {
            let _ = writeln!(
                out,
                "  {:<16} {:>6} {:>8.3} {:>10.4} {:>10.4} {:>7.2}",
                g.level, g.n_utterances, g.proportion, g.observed_wer, g.predicted_wer, g.raw_score
            );
        }
    }
    out
}

/// Corpus summary (size, speakers, duration, entropies), optionally side
/// by side with a second corpus.
pub fn stats_table(left: &CorpusStats, right: Option<(&str, &CorpusStats)>, left_name: &str) -> String {
    let mut out = String::new();
    let header = match right {
        Some((name, _)) => format!("{:<28} {:>14} {:>14} {:>9}", "", left_name, name, "delta"),
        None => format!("{:<28} {:>14}", "", left_name),
    };
    let _ = writeln!(out, "{}", header.trim_end());
    let mut row = |label: &str, a: String, b: Option<String>, d: Option<String>| {
        let line = match (b, d) {
            (Some(b), Some(d)) => format!("{label:<28} {a:>14} {b:>14} {d:>9}"),
            (Some(b), None) => format!("{label:<28} {a:>14} {b:>14}"),
            _ => format!("{label:<28} {a:>14}"),
        };
        let _ = writeln!(out, "{}", line.trim_end());
    };
    row(
        "Total samples",
        left.count.to_string(),
        right.map(|(_, r)| r.count.to_string()),
        None,
    );
    row(
        "Speakers",
        left.speakers.to_string(),
        right.map(|(_, r)| r.speakers.to_string()),
        None,
    );
    row(
        "Total duration (hrs)",
        format!("{:.2}", left.total_duration_hours()),
        right.map(|(_, r)| format!("{:.2}", r.total_duration_hours())),
        None,
    );
    for (attr, h) in &left.entropies {
        let other = right.map(|(_, r)| r.entropies[attr]);
        row(
            &format!("Entropy ({})", attr.as_str()),
            format!("{h:.4}"),
            other.map(|o| format!("{o:.4}")),
            other.map(|o| format!("{:.4}", (o - h).abs())),
        );
    }
    out
}
