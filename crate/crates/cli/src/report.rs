//! Plain-text summary of a run directory.

use std::fmt::Write;

use anyhow::Result;
use hemon_core::connectome::RoiAtlas;
use hemon_core::trunks::{area_at, system_composition, TrunkHierarchy};

use crate::stages::{EvalRecord, Variant};

fn rank(model: &str) -> usize {
    Variant::ALL.iter().position(|v| v.label() == model).unwrap_or(Variant::ALL.len())
}

pub fn render(h: Option<&TrunkHierarchy>, atlas: Option<&RoiAtlas>, evals: &[EvalRecord]) -> Result<String> {
    let mut out = String::new();
    match h {
        Some(h) => {
            writeln!(out, "Hierarchy: {} levels over {} nodes", h.level_count(), h.node_count())?;
            writeln!(out, "{:<7}{:>7}{:>7}", "level", "trunks", "nodes")?;
            for level in 1..=h.level_count() {
                let area = area_at(h, level)?;
                writeln!(out, "{:<7}{:>7}{:>7}", format!("L{level}"), h.trunks(level)?.len(), area.nodes.len())?;
            }
            if let Some(atlas) = atlas {
                writeln!(out, "\nSystem composition")?;
                for level in 1..=h.level_count() {
                    let counts = system_composition(&area_at(h, level)?, atlas)?;
                    let parts: Vec<String> = counts.iter().map(|(s, c)| format!("{s} {c}")).collect();
                    writeln!(out, "L{level}: {}", parts.join(", "))?;
                }
            }
        }
        None => writeln!(out, "No hierarchy found.")?,
    }

    writeln!(out)?;
    if evals.is_empty() {
        writeln!(out, "No evaluation runs found.")?;
        return Ok(out);
    }
    let mut rows: Vec<&EvalRecord> = evals.iter().collect();
    rows.sort_by(|a, b| (rank(&a.model), &a.model, &a.split).cmp(&(rank(&b.model), &b.model, &b.split)));
    writeln!(out, "{:<12}{:<7}{:>9}{:>12}", "model", "split", "samples", "mae")?;
    for r in rows {
        writeln!(out, "{:<12}{:<7}{:>9}{:>12.4}", r.model, r.split, r.samples, r.mae)?;
    }
    Ok(out)
}
