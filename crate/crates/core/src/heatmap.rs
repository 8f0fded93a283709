//! Quadrant heatmap rendering of the three similarity matrices.
//!
//! The composite places the original/original matrix top-left, the cross
//! matrix top-right and (transposed) bottom-left, and the protected/protected
//! matrix bottom-right, separated by single-pixel black rules. Cells are
//! coloured by linear per-channel interpolation between rgb(255,247,0) at
//! similarity 0 and rgb(209,20,20) at similarity 1.
//!
//! Two encodings are supported: binary PPM (P6), a raw raster with no label
//! geometry so renders are bit-exact testable, and SVG with axis labels and
//! a colorbar for documents.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cohort::MatrixKind;
use crate::similarity::SimilarityMatrix;

/// Linear two-point colormap over similarity values in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorMap {
    pub low_rgb: [u8; 3],
    pub high_rgb: [u8; 3],
}

impl Default for ColorMap {
    fn default() -> Self {
        Self {
            low_rgb: [255, 247, 0],
            high_rgb: [209, 20, 20],
        }
    }
}

impl ColorMap {
    /// Colour for a similarity value; channels round half-up.
    pub fn color_of(&self, s: f64) -> Result<[u8; 3], HeatmapError> {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(HeatmapError::OutOfRange { value: s });
        }
        let mut rgb = [0u8; 3];
        for (k, channel) in rgb.iter_mut().enumerate() {
            let low = f64::from(self.low_rgb[k]);
            let high = f64::from(self.high_rgb[k]);
            *channel = (low + s * (high - low) + 0.5).floor() as u8;
        }
        Ok(rgb)
    }
}

/// [`ColorMap::color_of`] with the default map.
pub fn color_of(s: f64) -> Result<[u8; 3], HeatmapError> {
    ColorMap::default().color_of(s)
}

/// Geometry of the composite raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompositeLayout {
    /// Pixels per matrix cell; must be at least 1.
    pub cell_size: u32,
}

impl Default for CompositeLayout {
    fn default() -> Self {
        Self { cell_size: 16 }
    }
}

#[derive(Debug, Error)]
pub enum HeatmapError {
    #[error("similarity value {value} is outside [0, 1]")]
    OutOfRange { value: f64 },
    #[error("matrices disagree on the speaker axis")]
    SpeakerOrderMismatch,
    #[error("matrix kinds must be OO, OP, PP in that order")]
    KindMismatch,
    #[error("cell size must be a positive number of pixels")]
    InvalidCellSize,
}

impl HeatmapError {
    pub fn kind(&self) -> &'static str {
        match self {
            HeatmapError::OutOfRange { .. } => "OutOfRange",
            HeatmapError::SpeakerOrderMismatch => "SpeakerOrderMismatch",
            HeatmapError::KindMismatch => "KindMismatch",
            HeatmapError::InvalidCellSize => "InvalidCellSize",
        }
    }
}

const SEPARATOR_RGB: [u8; 3] = [0, 0, 0];

fn check_composite(
    m_oo: &SimilarityMatrix,
    m_op: &SimilarityMatrix,
    m_pp: &SimilarityMatrix,
    layout: &CompositeLayout,
) -> Result<(), HeatmapError> {
    if layout.cell_size == 0 {
        return Err(HeatmapError::InvalidCellSize);
    }
    if m_oo.speakers() != m_op.speakers() || m_op.speakers() != m_pp.speakers() {
        return Err(HeatmapError::SpeakerOrderMismatch);
    }
    if m_oo.kind() != MatrixKind::OO
        || m_op.kind() != MatrixKind::OP
        || m_pp.kind() != MatrixKind::PP
    {
        return Err(HeatmapError::KindMismatch);
    }
    Ok(())
}

// cell of the 2N x 2N composite grid, quadrant-dispatched
fn composite_value(
    m_oo: &SimilarityMatrix,
    m_op: &SimilarityMatrix,
    m_pp: &SimilarityMatrix,
    row: usize,
    col: usize,
) -> f64 {
    let n = m_oo.n();
    match (row < n, col < n) {
        (true, true) => m_oo.cell(row, col),
        (true, false) => m_op.cell(row, col - n),
        // lower-left is the transpose of the cross matrix
        (false, true) => m_op.cell(col, row - n),
        (false, false) => m_pp.cell(row - n, col - n),
    }
}

fn ppm_bytes(width: u32, height: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Renders the composite quadrant raster as binary PPM.
///
/// The core raster is `2N * cell_size` pixels per side plus a single-pixel
/// black separator between the halves of each axis.
pub fn render_composite_ppm(
    m_oo: &SimilarityMatrix,
    m_op: &SimilarityMatrix,
    m_pp: &SimilarityMatrix,
    layout: &CompositeLayout,
) -> Result<Vec<u8>, HeatmapError> {
    check_composite(m_oo, m_op, m_pp, layout)?;
    let colors = ColorMap::default();
    let n = m_oo.n();
    let cs = layout.cell_size as usize;
    let half = n * cs;
    let side = 2 * half + 1;
    let mut pixels = vec![0u8; side * side * 3];
    for y in 0..side {
        for x in 0..side {
            let rgb = if y == half || x == half {
                SEPARATOR_RGB
            } else {
                let yy = if y < half { y } else { y - 1 };
                let xx = if x < half { x } else { x - 1 };
                let value = composite_value(m_oo, m_op, m_pp, yy / cs, xx / cs);
                colors.color_of(value)?
            };
            let at = (y * side + x) * 3;
            pixels[at..at + 3].copy_from_slice(&rgb);
        }
    }
    Ok(ppm_bytes(side as u32, side as u32, &pixels))
}

/// Renders a single matrix as binary PPM (no separators, no labels).
pub fn render_single_ppm(
    matrix: &SimilarityMatrix,
    layout: &CompositeLayout,
) -> Result<Vec<u8>, HeatmapError> {
    if layout.cell_size == 0 {
        return Err(HeatmapError::InvalidCellSize);
    }
    let colors = ColorMap::default();
    let n = matrix.n();
    let cs = layout.cell_size as usize;
    let side = n * cs;
    let mut pixels = vec![0u8; side * side * 3];
    for y in 0..side {
        for x in 0..side {
            let rgb = colors.color_of(matrix.cell(y / cs, x / cs))?;
            let at = (y * side + x) * 3;
            pixels[at..at + 3].copy_from_slice(&rgb);
        }
    }
    Ok(ppm_bytes(side as u32, side as u32, &pixels))
}

fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

const SVG_MARGIN_LEFT: usize = 16;
const SVG_MARGIN_TOP: usize = 4;
const SVG_MARGIN_BOTTOM: usize = 16;
const SVG_BAR_GAP: usize = 14;
const SVG_BAR_WIDTH: usize = 12;
const SVG_BAR_TEXT: usize = 30;

fn svg_cells(
    out: &mut String,
    colors: &ColorMap,
    value: f64,
    x: usize,
    y: usize,
    cs: usize,
) -> Result<(), HeatmapError> {
    let fill = hex(colors.color_of(value)?);
    writeln!(
        out,
        r#"<rect x="{x}" y="{y}" width="{cs}" height="{cs}" fill="{fill}"/>"#
    )
    .expect("string write");
    Ok(())
}

/// Renders the composite as SVG with axis labels and a colorbar.
pub fn render_composite_svg(
    m_oo: &SimilarityMatrix,
    m_op: &SimilarityMatrix,
    m_pp: &SimilarityMatrix,
    layout: &CompositeLayout,
) -> Result<String, HeatmapError> {
    check_composite(m_oo, m_op, m_pp, layout)?;
    let colors = ColorMap::default();
    let n = m_oo.n();
    let cs = layout.cell_size as usize;
    let half = n * cs;
    let core = 2 * half + 1;
    let width = SVG_MARGIN_LEFT + core + SVG_BAR_GAP + SVG_BAR_WIDTH + SVG_BAR_TEXT;
    let height = SVG_MARGIN_TOP + core + SVG_MARGIN_BOTTOM;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .expect("string write");
    writeln!(
        out,
        r#"<defs><linearGradient id="sim" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
        hex(colors.low_rgb),
        hex(colors.high_rgb)
    )
    .expect("string write");

    for row in 0..(2 * n) {
        for col in 0..(2 * n) {
            let x = SVG_MARGIN_LEFT + col * cs + usize::from(col >= n);
            let y = SVG_MARGIN_TOP + row * cs + usize::from(row >= n);
            svg_cells(
                &mut out,
                &colors,
                composite_value(m_oo, m_op, m_pp, row, col),
                x,
                y,
                cs,
            )?;
        }
    }
    // separators between the halves
    writeln!(
        out,
        r##"<rect x="{}" y="{}" width="1" height="{core}" fill="#000000"/>"##,
        SVG_MARGIN_LEFT + half,
        SVG_MARGIN_TOP
    )
    .expect("string write");
    writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{core}" height="1" fill="#000000"/>"##,
        SVG_MARGIN_LEFT,
        SVG_MARGIN_TOP + half
    )
    .expect("string write");

    // O / P labels per half-axis
    let text = |out: &mut String, x: usize, y: usize, anchor: &str, label: &str| {
        writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{label}</text>"#
        )
        .expect("string write");
    };
    let center0 = SVG_MARGIN_LEFT + half / 2;
    let center1 = SVG_MARGIN_LEFT + half + 1 + half / 2;
    let baseline = SVG_MARGIN_TOP + core + 12;
    text(&mut out, center0, baseline, "middle", "O");
    text(&mut out, center1, baseline, "middle", "P");
    let left = SVG_MARGIN_LEFT.saturating_sub(6);
    text(&mut out, left, SVG_MARGIN_TOP + half / 2 + 4, "middle", "O");
    text(
        &mut out,
        left,
        SVG_MARGIN_TOP + half + 1 + half / 2 + 4,
        "middle",
        "P",
    );

    // colorbar with numeric ticks
    let bar_x = SVG_MARGIN_LEFT + core + SVG_BAR_GAP;
    writeln!(
        out,
        r##"<rect x="{bar_x}" y="{}" width="{SVG_BAR_WIDTH}" height="{core}" fill="url(#sim)" stroke="#000000" stroke-width="0.5"/>"##,
        SVG_MARGIN_TOP
    )
    .expect("string write");
    for tick in 0..=5 {
        let value = tick as f64 / 5.0;
        let y = SVG_MARGIN_TOP + core - (value * core as f64).round() as usize;
        writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#000000" stroke-width="0.5"/>"##,
            bar_x + SVG_BAR_WIDTH,
            bar_x + SVG_BAR_WIDTH + 3
        )
        .expect("string write");
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="9" text-anchor="start">{:.1}</text>"#,
            bar_x + SVG_BAR_WIDTH + 5,
            y + 3,
            value
        )
        .expect("string write");
    }
    writeln!(out, "</svg>").expect("string write");
    Ok(out)
}

/// Renders one matrix as SVG with its kind as a caption.
pub fn render_single_svg(
    matrix: &SimilarityMatrix,
    layout: &CompositeLayout,
) -> Result<String, HeatmapError> {
    if layout.cell_size == 0 {
        return Err(HeatmapError::InvalidCellSize);
    }
    let colors = ColorMap::default();
    let n = matrix.n();
    let cs = layout.cell_size as usize;
    let core = n * cs;
    let width = SVG_MARGIN_LEFT + core + 4;
    let height = SVG_MARGIN_TOP + core + SVG_MARGIN_BOTTOM;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .expect("string write");
    for row in 0..n {
        for col in 0..n {
            svg_cells(
                &mut out,
                &colors,
                matrix.cell(row, col),
                SVG_MARGIN_LEFT + col * cs,
                SVG_MARGIN_TOP + row * cs,
                cs,
            )?;
        }
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
        SVG_MARGIN_LEFT + core / 2,
        SVG_MARGIN_TOP + core + 12,
        matrix.kind()
    )
    .expect("string write");
    writeln!(out, "</svg>").expect("string write");
    Ok(out)
}
