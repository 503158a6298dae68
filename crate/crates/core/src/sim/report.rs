//! CSV and text output of episodes and metrics.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::episode::EpisodeTrace;
use super::metrics::MetricsReport;
use crate::error::{Error, Result};
use crate::model::{GopTemplate, Scenario};

fn join(v: &[u32]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Per-slot, per-user CSV of an episode.
pub fn write_trace_csv<W: Write>(scenario: &Scenario, trace: &EpisodeTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "slot", "user", "s0", "lambda0", "price", "phase", "channel", "buffer", "requested", "sent", "share", "bandwidth",
        "distortion", "energy", "payoff", "lost",
    ])?;
    for rec in &trace.slots {
        for (i, u) in rec.users.iter().enumerate() {
            let t = &scenario.users[i].template;
            let lost: Vec<String> = u
                .lost
                .iter()
                .map(|&(du, k)| format!("{}:{k}", t.du(du).label))
                .collect();
            w.write_record([
                rec.slot.to_string(),
                scenario.users[i].name.clone(),
                rec.s0.to_string(),
                rec.lambda0.map(|l| format!("{l:.9}")).unwrap_or_default(),
                format!("{:.9}", u.price),
                u.state.phase.to_string(),
                u.state.channel.to_string(),
                join(&u.state.buffer),
                join(&u.requested.sends),
                join(&u.sent.sends),
                format!("{:.6}", u.bandwidth / scenario.bandwidth),
                format!("{:.9}", u.bandwidth),
                format!("{:.9}", u.distortion),
                format!("{:.9}", u.energy),
                format!("{:.9}", u.payoff),
                lost.join(" "),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// One row per (report, user) plus a network row per report.
pub fn write_metrics_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "solution",
        "seed",
        "user",
        "slots",
        "discounted_payoff",
        "mean_payoff",
        "mean_distortion",
        "mean_energy",
        "mean_bandwidth",
        "losses",
        "i_loss_after_first",
    ])?;
    for r in reports {
        for u in &r.users {
            let losses: Vec<String> = u.losses.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            w.write_record([
                r.solution.clone(),
                r.seed.to_string(),
                u.name.clone(),
                r.slots.to_string(),
                format!("{:.9}", u.discounted_payoff),
                format!("{:.9}", u.mean_payoff),
                format!("{:.9}", u.mean_distortion),
                format!("{:.9}", u.mean_energy),
                format!("{:.9}", u.mean_bandwidth),
                losses.join(" "),
                u.i_loss_after_first.to_string(),
            ])?;
        }
        w.write_record([
            r.solution.clone(),
            r.seed.to_string(),
            "network".into(),
            r.slots.to_string(),
            format!("{:.9}", r.network_discounted()),
            format!("{:.9}", r.network_mean_payoff()),
            format!("{:.9}", r.network_mean_distortion()),
            String::new(),
            String::new(),
            String::new(),
            r.i_loss_after_first().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn entries(t: &GopTemplate, phase: u32, counts: &[u32]) -> String {
    let ctx = t.context(phase as u64);
    ctx.entries
        .iter()
        .zip(counts)
        .map(|(e, k)| format!("{}({k})", t.du(e.du).label))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One column per slot and rows for traffic states, channel state,
/// resource allocation, packet scheduling and packet loss; one block per
/// trace.
pub fn replay_table(scenario: &Scenario, traces: &[EpisodeTrace]) -> String {
    let mut s = String::new();
    for tr in traces {
        let row = |s: &mut String, label: &str, cells: Vec<String>| {
            let _ = writeln!(s, "| {label} | {} |", cells.join(" | "));
        };
        let _ = writeln!(s, "## {}", tr.solution);
        row(&mut s, "slot", tr.slots.iter().map(|r| r.slot.to_string()).collect());
        row(&mut s, "---", tr.slots.iter().map(|_| "---".to_string()).collect());
        for (i, cfg) in scenario.users.iter().enumerate() {
            let cells = tr
                .slots
                .iter()
                .map(|r| entries(&cfg.template, r.users[i].state.phase, &r.users[i].state.buffer))
                .collect();
            row(&mut s, &format!("traffic {}", cfg.name), cells);
        }
        let chan = tr
            .slots
            .iter()
            .map(|r| {
                let names: Vec<&str> = r
                    .users
                    .iter()
                    .zip(&scenario.users)
                    .map(|(u, c)| c.channel.state(u.state.channel).name.as_str())
                    .collect();
                if names.windows(2).all(|w| w[0] == w[1]) {
                    names[0].to_string()
                } else {
                    format!("({})", names.join(", "))
                }
            })
            .collect();
        row(&mut s, "channel", chan);
        let alloc = tr
            .slots
            .iter()
            .map(|r| {
                let v: Vec<String> = r.users.iter().map(|u| format!("{:.2}", u.bandwidth / scenario.bandwidth)).collect();
                format!("({})", v.join(", "))
            })
            .collect();
        row(&mut s, "allocation", alloc);
        for (i, cfg) in scenario.users.iter().enumerate() {
            let cells = tr
                .slots
                .iter()
                .map(|r| entries(&cfg.template, r.users[i].state.phase, &r.users[i].sent.sends))
                .collect();
            row(&mut s, &format!("scheduling {}", cfg.name), cells);
        }
        let loss = tr
            .slots
            .iter()
            .map(|r| {
                let mut v = Vec::new();
                for (u, cfg) in r.users.iter().zip(&scenario.users) {
                    for &(du, k) in &u.lost {
                        v.push(format!("{}({k}) {}", cfg.template.du(du).label, cfg.name));
                    }
                }
                if v.is_empty() {
                    "-".to_string()
                } else {
                    v.join(", ")
                }
            })
            .collect();
        row(&mut s, "loss", loss);
        let _ = writeln!(s);
    }
    s
}

/// Writes `trace-<solution>-<seed>.csv` for every trace, `metrics.csv` and,
/// for short episodes, `table.md` into `dir`.
pub fn emit_report(dir: &Path, scenario: &Scenario, traces: &[EpisodeTrace], reports: &[MetricsReport]) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::Usage("no traces to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        fs::File::create(&p).map_err(|e| Error::io(p, e))
    };
    for tr in traces {
        let name = format!("trace-{}-{}.csv", tr.solution.to_string().replace('+', "_"), tr.seed);
        write_trace_csv(scenario, tr, create(&name)?)?;
    }
    write_metrics_csv(reports, create("metrics.csv")?)?;
    if traces.iter().all(|t| t.slots.len() <= 50) {
        let p = dir.join("table.md");
        fs::write(&p, replay_table(scenario, traces)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
