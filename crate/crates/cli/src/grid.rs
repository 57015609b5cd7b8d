//! Expansion of the level lists into evaluated grid points.

use posebench::degrade::DegradationConfig;

use crate::config::GridSpec;

/// One evaluated artifact setting and its report label. Levels use the
/// reference table's units: frames, ratio, probability and centimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub condition: String,
    pub level: Option<f64>,
    /// Seed left at zero; runs fill it in per clip and seed.
    pub degradation: DegradationConfig,
}

pub const CLEAN: &str = "clean";

/// Meters to centimeters, rounded to 1e-9 so 0.05 m prints as `5`.
pub fn noise_level_cm(noise_std_m: f64) -> f64 {
    (noise_std_m * 100.0 * 1e9).round() / 1e9
}

fn clean_point() -> GridPoint {
    GridPoint { condition: CLEAN.into(), level: None, degradation: DegradationConfig::default() }
}

/// Non-neutral `(condition, level, config)` entries of each axis, in list
/// order with repeats dropped.
fn axes(grid: &GridSpec) -> Vec<Vec<(&'static str, f64, DegradationConfig)>> {
    let base = DegradationConfig::default();
    let mut out = vec![
        grid.delay_frames
            .iter()
            .filter(|d| **d != 0)
            .map(|&d| ("delay", d as f64, DegradationConfig { delay_frames: d, ..base }))
            .collect::<Vec<_>>(),
        grid.fps_ratio
            .iter()
            .filter(|r| **r != 1)
            .map(|&r| ("fps_ratio", r as f64, DegradationConfig { fps_ratio: r, ..base }))
            .collect(),
        grid.occlusion_prob
            .iter()
            .filter(|p| **p != 0.0)
            .map(|&p| ("occlusion", p, DegradationConfig { occlusion_prob: p, ..base }))
            .collect(),
        grid.noise_std_m
            .iter()
            .filter(|s| **s != 0.0)
            .map(|&s| ("noise", noise_level_cm(s), DegradationConfig { noise_std_m: s, ..base }))
            .collect(),
    ];
    for axis in &mut out {
        let mut seen: Vec<f64> = Vec::new();
        axis.retain(|(name, level, _)| {
            if seen.contains(level) {
                log::warn!("{name} level {level} listed twice; evaluating it once");
                false
            } else {
                seen.push(*level);
                true
            }
        });
    }
    out
}

/// The clean point followed by each artifact varied alone or, with
/// `full_product`, by every combination of levels. Combined points are
/// labeled like `delay=2+noise=1` with no level.
pub fn expand(grid: &GridSpec, full_product: bool) -> Vec<GridPoint> {
    let axes = axes(grid);
    let mut points = vec![clean_point()];
    if !full_product {
        for axis in &axes {
            for (name, level, cfg) in axis {
                points.push(GridPoint { condition: (*name).into(), level: Some(*level), degradation: *cfg });
            }
        }
        return points;
    }
    // each axis contributes "off" plus its levels
    let mut combos: Vec<Vec<&(&str, f64, DegradationConfig)>> = vec![vec![]];
    for axis in &axes {
        let mut next = Vec::new();
        for combo in &combos {
            next.push(combo.clone());
            for entry in axis {
                let mut c = combo.clone();
                c.push(entry);
                next.push(c);
            }
        }
        combos = next;
    }
    for combo in combos.into_iter().filter(|c| !c.is_empty()) {
        let mut cfg = DegradationConfig::default();
        for (_, _, c) in &combo {
            cfg.delay_frames = cfg.delay_frames.max(c.delay_frames);
            cfg.fps_ratio = cfg.fps_ratio.max(c.fps_ratio);
            cfg.occlusion_prob = cfg.occlusion_prob.max(c.occlusion_prob);
            cfg.noise_std_m = cfg.noise_std_m.max(c.noise_std_m);
        }
        let point = if combo.len() == 1 {
            GridPoint { condition: combo[0].0.into(), level: Some(combo[0].1), degradation: cfg }
        } else {
            let label = combo.iter().map(|(n, l, _)| format!("{n}={l}")).collect::<Vec<_>>().join("+");
            GridPoint { condition: label, level: None, degradation: cfg }
        };
        points.push(point);
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_row_count() {
        // 3 delays + 3 ratios + 2 occlusion levels + 3 noise levels, plus clean
        let points = expand(&GridSpec::standard(), false);
        assert_eq!(points.len(), 3 + 3 + 2 + 3 + 1);
        assert_eq!(points[0].condition, CLEAN);
        let noise: Vec<f64> = points.iter().filter(|p| p.condition == "noise").map(|p| p.level.unwrap()).collect();
        assert_eq!(noise, vec![1.0, 2.0, 5.0]);
        for p in &points[1..] {
            assert!(!p.degradation.is_neutral());
        }
    }

    #[test]
    fn neutral_grid_is_clean_only() {
        assert_eq!(expand(&GridSpec::neutral(), false), vec![clean_point()]);
        assert_eq!(expand(&GridSpec::neutral(), true), vec![clean_point()]);
    }

    #[test]
    fn full_product_counts() {
        // (3 + 1)(3 + 1)(2 + 1)(3 + 1) combinations including all-off
        let points = expand(&GridSpec::standard(), true);
        assert_eq!(points.len(), 4 * 4 * 3 * 4);
        let labels: std::collections::BTreeSet<(String, Option<u64>)> =
            points.iter().map(|p| (p.condition.clone(), p.level.map(f64::to_bits))).collect();
        assert_eq!(labels.len(), points.len());
        let p = points.iter().find(|p| p.condition == "delay=4+noise=2").unwrap();
        assert_eq!(p.degradation.delay_frames, 4);
        assert_eq!(p.degradation.noise_std_m, 0.02);
        assert_eq!(p.degradation.fps_ratio, 1);
    }

    #[test]
    fn repeated_and_neutral_levels_collapse() {
        let grid = GridSpec { delay_frames: vec![0, 2, 2], fps_ratio: vec![1], occlusion_prob: vec![0.0], noise_std_m: vec![0.0, 0.05] };
        let points = expand(&grid, false);
        assert_eq!(points.iter().map(|p| p.condition.as_str()).collect::<Vec<_>>(), vec!["clean", "delay", "noise"]);
        assert_eq!(points[2].level, Some(5.0));
    }
}
