//! In-plane raster of the reference-cell grid material.
//!
//! The unit cell carries a boolean raster over its in-plane cross section:
//! `true` pixels are grid material, `false` pixels are the complement (air
//! or liquid). The raster is 1D in reduced mode and square 2D in full mode;
//! pixels are half-open, lower-left inclusive.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// Orthogonal bars through the cell center (one bar in reduced mode).
    Cross,
    /// Bands along the cell boundary.
    Frame,
    /// Imported raster.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPattern {
    kind: PatternKind,
    /// Number of in-plane raster axes: 1 (reduced) or 2 (full).
    dims: usize,
    res: usize,
    raster: Vec<bool>,
    fill_fraction: f64,
}

impl LayerPattern {
    /// Builds a named pattern. `bar_width` is the bar (or band) width as a
    /// fraction of the cell, `raster_res` the pixels per axis.
    pub fn build(kind: PatternKind, bar_width: f64, raster_res: usize, dims: usize) -> Result<Self> {
        if !(0.0 < bar_width && bar_width < 1.0) {
            return Err(CageError::Pattern(format!(
                "bar_width must lie in (0,1), got {bar_width}"
            )));
        }
        if raster_res < 4 {
            return Err(CageError::Pattern(format!(
                "raster_res must be at least 4, got {raster_res}"
            )));
        }
        if dims != 1 && dims != 2 {
            return Err(CageError::Pattern(format!("dims must be 1 or 2, got {dims}")));
        }
        let r = raster_res;
        let inside = |c: f64, lo: f64, hi: f64| lo <= c && c < hi;
        let half = bar_width / 2.0;
        let mut raster = Vec::with_capacity(r.pow(dims as u32));
        match dims {
            1 => {
                for i in 0..r {
                    let c = (i as f64 + 0.5) / r as f64;
                    let v = match kind {
                        PatternKind::Cross => inside(c, 0.5 - half, 0.5 + half),
                        PatternKind::Frame => c < half || c >= 1.0 - half,
                        PatternKind::Custom => {
                            return Err(CageError::Pattern(
                                "custom patterns are built from a raster, not a width".into(),
                            ))
                        }
                    };
                    raster.push(v);
                }
            }
            _ => {
                for j in 0..r {
                    let cy = (j as f64 + 0.5) / r as f64;
                    for i in 0..r {
                        let cx = (i as f64 + 0.5) / r as f64;
                        let v = match kind {
                            PatternKind::Cross => {
                                inside(cx, 0.5 - half, 0.5 + half)
                                    || inside(cy, 0.5 - half, 0.5 + half)
                            }
                            PatternKind::Frame => {
                                cx < half
                                    || cx >= 1.0 - half
                                    || cy < half
                                    || cy >= 1.0 - half
                            }
                            PatternKind::Custom => unreachable!(),
                        };
                        raster.push(v);
                    }
                }
            }
        }
        Self::from_parts(kind, dims, r, raster)
    }

    /// Builds a custom pattern from an explicit raster (row-major for 2D).
    pub fn from_raster(raster: Vec<bool>, res: usize, dims: usize) -> Result<Self> {
        if dims != 1 && dims != 2 {
            return Err(CageError::Pattern(format!("dims must be 1 or 2, got {dims}")));
        }
        if res < 1 || raster.len() != res.pow(dims as u32) {
            return Err(CageError::Pattern(format!(
                "raster length {} does not match res {res} with {dims} axes",
                raster.len()
            )));
        }
        Self::from_parts(PatternKind::Custom, dims, res, raster)
    }

    fn from_parts(kind: PatternKind, dims: usize, res: usize, raster: Vec<bool>) -> Result<Self> {
        let filled = raster.iter().filter(|&&b| b).count();
        if filled == 0 {
            return Err(CageError::Pattern(
                "grid region is empty after rasterization".into(),
            ));
        }
        if filled == raster.len() {
            return Err(CageError::Pattern(
                "grid fills the whole cell; the complement must be nonempty".into(),
            ));
        }
        let fill_fraction = filled as f64 / raster.len() as f64;
        Ok(Self { kind, dims, res, raster, fill_fraction })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    pub fn fill_fraction(&self) -> f64 {
        self.fill_fraction
    }

    pub fn pixel(&self, ix: usize, iy: usize) -> bool {
        match self.dims {
            1 => self.raster[ix],
            _ => self.raster[iy * self.res + ix],
        }
    }

    /// Membership of an in-plane point given by its fractional cell
    /// coordinates in [0,1). Half-open pixels, lower-left inclusive.
    pub fn contains_frac(&self, frac: &[f64]) -> bool {
        let px = |f: f64| (((f * self.res as f64).floor() as isize).clamp(0, self.res as isize - 1)) as usize;
        match self.dims {
            1 => self.pixel(px(frac[0]), 0),
            _ => self.pixel(px(frac[0]), px(frac[1])),
        }
    }

    /// Whether the periodic tiling of the grid pixels forms a single
    /// connected component. Checked on a 3× tiled copy with plain (non
    /// wrap-around) adjacency, which is what the infinite tiling sees.
    pub fn tiling_connected(&self) -> bool {
        let r = self.res;
        let copies = 3usize;
        let side = copies * r;
        let at = |ix: usize, iy: usize| -> bool {
            match self.dims {
                1 => self.raster[ix % r],
                _ => self.raster[(iy % r) * r + (ix % r)],
            }
        };
        let rows = if self.dims == 1 { 1 } else { side };
        let mut seen = vec![false; side * rows];
        let mut queue = Vec::new();
        let mut total = 0usize;
        let mut start = None;
        for iy in 0..rows {
            for ix in 0..side {
                if at(ix, iy) {
                    total += 1;
                    if start.is_none() {
                        start = Some((ix, iy));
                    }
                }
            }
        }
        let Some(s) = start else { return false };
        queue.push(s);
        seen[s.1 * side + s.0] = true;
        let mut count = 0usize;
        while let Some((ix, iy)) = queue.pop() {
            count += 1;
            let mut push = |jx: isize, jy: isize| {
                if jx < 0 || jy < 0 || jx >= side as isize || jy >= rows as isize {
                    return;
                }
                let (jx, jy) = (jx as usize, jy as usize);
                if at(jx, jy) && !seen[jy * side + jx] {
                    seen[jy * side + jx] = true;
                    queue.push((jx, jy));
                }
            };
            push(ix as isize - 1, iy as isize);
            push(ix as isize + 1, iy as isize);
            if self.dims == 2 {
                push(ix as isize, iy as isize - 1);
                push(ix as isize, iy as isize + 1);
            }
        }
        count == total
    }

    /// Plain-text raster: one line per row, characters '0'/'1'.
    pub fn to_text(&self) -> String {
        let rows = if self.dims == 1 { 1 } else { self.res };
        let mut out = String::new();
        for iy in 0..rows {
            for ix in 0..self.res {
                out.push(if self.pixel(ix, iy) { '1' } else { '0' });
            }
            let _ = writeln!(out);
        }
        out
    }

    /// Parses the plain-text raster format. One line means a reduced-mode
    /// pattern; otherwise the raster must be square.
    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(CageError::Pattern("empty raster file".into()));
        }
        let width = lines[0].chars().count();
        let mut raster = Vec::with_capacity(width * lines.len());
        for line in &lines {
            if line.chars().count() != width {
                return Err(CageError::Pattern("ragged raster rows".into()));
            }
            for ch in line.chars() {
                match ch {
                    '0' => raster.push(false),
                    '1' => raster.push(true),
                    other => {
                        return Err(CageError::Pattern(format!(
                            "raster rows must contain only 0/1, found {other:?}"
                        )))
                    }
                }
            }
        }
        if lines.len() == 1 {
            Self::from_raster(raster, width, 1)
        } else if lines.len() == width {
            Self::from_raster(raster, width, 2)
        } else {
            Err(CageError::Pattern(format!(
                "2D raster must be square, got {}x{}",
                lines.len(),
                width
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_half_width_fill() {
        let p = LayerPattern::build(PatternKind::Cross, 0.5, 8, 2).unwrap();
        // Two crossing bars: 1 − (1 − 1/2)² = 3/4.
        assert!((p.fill_fraction() - 0.75).abs() < 1e-15);
        let p1 = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        assert!((p1.fill_fraction() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cross_quarter_width_fill_matches_inclusion_exclusion() {
        let p = LayerPattern::build(PatternKind::Cross, 0.25, 16, 2).unwrap();
        let expect = 1.0 - 0.75 * 0.75;
        // Pixel count must agree with inclusion–exclusion to within a row.
        let one_row = 1.0 / 16.0;
        assert!((p.fill_fraction() - expect).abs() <= one_row + 1e-15);
        assert!((p.fill_fraction() - expect).abs() < 1e-15, "exact for aligned widths");
    }

    #[test]
    fn rejects_degenerate_widths() {
        assert!(LayerPattern::build(PatternKind::Cross, 1.0 - 1e-12, 8, 2).is_err());
        assert!(LayerPattern::build(PatternKind::Cross, 1e-9, 8, 2).is_err());
        assert!(LayerPattern::build(PatternKind::Cross, 0.5, 3, 2).is_err());
    }

    #[test]
    fn cross_tiling_connected_in_full_mode_only() {
        let p2 = LayerPattern::build(PatternKind::Cross, 0.5, 8, 2).unwrap();
        assert!(p2.tiling_connected());
        let frame = LayerPattern::build(PatternKind::Frame, 0.25, 8, 2).unwrap();
        assert!(frame.tiling_connected());
        // A reduced-mode bar is a wire cross section: isolated per period.
        let p1 = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        assert!(!p1.tiling_connected());
        let f1 = LayerPattern::build(PatternKind::Frame, 0.5, 8, 1).unwrap();
        assert!(f1.tiling_connected());
    }

    #[test]
    fn text_round_trip() {
        let p = LayerPattern::build(PatternKind::Cross, 0.25, 8, 2).unwrap();
        let q = LayerPattern::from_text(&p.to_text()).unwrap();
        assert_eq!(p.resolution(), q.resolution());
        assert_eq!(p.fill_fraction(), q.fill_fraction());
        for iy in 0..8 {
            for ix in 0..8 {
                assert_eq!(p.pixel(ix, iy), q.pixel(ix, iy));
            }
        }
        assert!(LayerPattern::from_text("01\n011\n").is_err());
        assert!(LayerPattern::from_text("01x\n").is_err());
        assert!(LayerPattern::from_text("").is_err());
    }

    #[test]
    fn half_open_membership() {
        let p = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        assert!(p.contains_frac(&[0.5]));
        assert!(p.contains_frac(&[0.25]), "lower edge pixel is inside");
        assert!(!p.contains_frac(&[0.75]), "upper edge pixel is outside");
        assert!(!p.contains_frac(&[0.0]));
    }
}
