use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binaural::{auditory_binaural_loss, BinauralTerms};
use super::signal::{check_binaural, mag_stft_loss, si_sdr, stft_loss};
use super::LossWeights;
use crate::auditory::{analyze, AuditoryConfig};
use crate::error::{Error, Result};
use crate::signal::{stft, AudioBuffer, ComplexSpectrogram, StftConfig};

/// Rotation ranges reported separately, degrees; a rotation belongs to the
/// range whose upper edge is the first one at or above it.
pub const ROTATION_BINS: [(u32, u32); 4] = [(21, 30), (31, 40), (41, 50), (51, 60)];

pub const CSV_HEADER: &str = "group,n,si_sdr,l_stft,l_mag_stft,l_ild,l_ipd,l_ivs";

/// Label of the rotation range containing `deg`, if any.
pub fn rotation_bin(deg: f64) -> Option<String> {
    ROTATION_BINS
        .iter()
        .find(|(lo, hi)| deg > (*lo - 1) as f64 && deg <= *hi as f64)
        .map(|(lo, hi)| format!("{lo}-{hi}"))
}

/// Settings shared by every evaluated item.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub stft: StftConfig,
    pub auditory: AuditoryConfig,
    pub weights: LossWeights,
    pub cutoff_hz: f64,
}

impl Default for EvalContext {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            auditory: AuditoryConfig::default(),
            weights: LossWeights::evaluation(),
            cutoff_hz: 1500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub id: String,
    pub rotation_deg: f64,
}

/// Every metric for one reference/estimate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub id: String,
    pub rotation_deg: f64,
    /// Ear-weighted SI-SDR, dB.
    pub si_sdr: f64,
    pub si_sdr_right: f64,
    pub si_sdr_left: f64,
    pub l_stft: f64,
    pub l_stft_right: f64,
    pub l_stft_left: f64,
    pub l_mag_stft: f64,
    pub l_mag_stft_right: f64,
    pub l_mag_stft_left: f64,
    pub l_ild: f64,
    pub l_ipd: f64,
    pub l_ivs: f64,
}

pub fn item_metrics(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    meta: &ItemMeta,
    ctx: &EvalContext,
) -> Result<ItemMetrics> {
    check_binaural(reference, estimate)?;
    let r = si_sdr(reference.channel(1), estimate.channel(1))?;
    let l = si_sdr(reference.channel(0), estimate.channel(0))?;
    let ew = ctx.weights.ear_weights;
    let (sr, se) = (stft(reference, &ctx.stft)?, stft(estimate, &ctx.stft)?);
    let ear = |s: &ComplexSpectrogram, ch: usize| s.extract(ch);
    let signal = |a: &ComplexSpectrogram, b: &ComplexSpectrogram| -> Result<(f64, f64)> {
        Ok((stft_loss(a, b, ctx.cutoff_hz)?, mag_stft_loss(a, b, ctx.cutoff_hz)?))
    };
    let (st, mg) = signal(&sr, &se)?;
    let (st_r, mg_r) = signal(&ear(&sr, 1), &ear(&se, 1))?;
    let (st_l, mg_l) = signal(&ear(&sr, 0), &ear(&se, 0))?;
    let BinauralTerms { ild, ipd, ivs, .. } = auditory_binaural_loss(
        &analyze(reference, &ctx.auditory)?,
        &analyze(estimate, &ctx.auditory)?,
        &ctx.weights,
    )?;
    Ok(ItemMetrics {
        id: meta.id.clone(),
        rotation_deg: meta.rotation_deg,
        si_sdr: ew.right * r + ew.left * l,
        si_sdr_right: r,
        si_sdr_left: l,
        l_stft: st,
        l_stft_right: st_r,
        l_stft_left: st_l,
        l_mag_stft: mg,
        l_mag_stft_right: mg_r,
        l_mag_stft_left: mg_l,
        l_ild: ild,
        l_ipd: ipd,
        l_ivs: ivs,
    })
}

/// Aggregate row; binaural columns are absent for single-ear groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub n: usize,
    pub si_sdr: f64,
    pub l_stft: f64,
    pub l_mag_stft: f64,
    pub l_ild: Option<f64>,
    pub l_ipd: Option<f64>,
    pub l_ivs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub groups: Vec<GroupRow>,
    pub items: Vec<ItemMetrics>,
}

fn mean(items: &[&ItemMetrics], f: impl Fn(&ItemMetrics) -> f64) -> f64 {
    items.iter().map(|m| f(m)).sum::<f64>() / items.len() as f64
}

fn binaural_row(group: String, items: &[&ItemMetrics]) -> GroupRow {
    GroupRow {
        group,
        n: items.len(),
        si_sdr: mean(items, |m| m.si_sdr),
        l_stft: mean(items, |m| m.l_stft),
        l_mag_stft: mean(items, |m| m.l_mag_stft),
        l_ild: Some(mean(items, |m| m.l_ild)),
        l_ipd: Some(mean(items, |m| m.l_ipd)),
        l_ivs: Some(mean(items, |m| m.l_ivs)),
    }
}

impl MetricReport {
    /// Groups, in order: all, right, left, then each populated rotation
    /// range.
    pub fn from_items(items: Vec<ItemMetrics>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyInput("evaluation items"));
        }
        let all: Vec<&ItemMetrics> = items.iter().collect();
        let mut groups = vec![binaural_row("all".into(), &all)];
        groups.push(GroupRow {
            group: "right".into(),
            n: all.len(),
            si_sdr: mean(&all, |m| m.si_sdr_right),
            l_stft: mean(&all, |m| m.l_stft_right),
            l_mag_stft: mean(&all, |m| m.l_mag_stft_right),
            l_ild: None,
            l_ipd: None,
            l_ivs: None,
        });
        groups.push(GroupRow {
            group: "left".into(),
            n: all.len(),
            si_sdr: mean(&all, |m| m.si_sdr_left),
            l_stft: mean(&all, |m| m.l_stft_left),
            l_mag_stft: mean(&all, |m| m.l_mag_stft_left),
            l_ild: None,
            l_ipd: None,
            l_ivs: None,
        });
        for (lo, hi) in ROTATION_BINS {
            let label = format!("{lo}-{hi}");
            let members: Vec<&ItemMetrics> = items
                .iter()
                .filter(|m| rotation_bin(m.rotation_deg).as_deref() == Some(label.as_str()))
                .collect();
            if !members.is_empty() {
                groups.push(binaural_row(label, &members));
            }
        }
        Ok(Self { groups, items })
    }

    pub fn group(&self, name: &str) -> Option<&GroupRow> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                g.group,
                g.n,
                g.si_sdr,
                g.l_stft,
                g.l_mag_stft,
                opt(g.l_ild),
                opt(g.l_ipd),
                opt(g.l_ivs)
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Scores every pair (in parallel, order preserved) and aggregates.
pub fn evaluate_pairs(items: &[(AudioBuffer, AudioBuffer, ItemMeta)], ctx: &EvalContext) -> Result<MetricReport> {
    if items.is_empty() {
        return Err(Error::EmptyInput("evaluation items"));
    }
    let metrics = items
        .par_iter()
        .map(|(r, e, m)| item_metrics(r, e, m, ctx))
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_items(metrics)
}
