//! PNG heatmaps with one pixel block per element.

use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thermotopo::Mesh;

use crate::error::CliError;
use crate::export::{write_file, FieldRef};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    /// Black to white.
    Gray,
    /// Black, red, yellow, white.
    #[default]
    Heat,
}

impl Palette {
    /// Colour for `s` in `[0, 1]`; every channel is non-decreasing in `s`.
    pub fn color(self, s: f64) -> Rgb<u8> {
        let s = s.clamp(0.0, 1.0);
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        match self {
            Palette::Gray => Rgb([q(s); 3]),
            Palette::Heat => Rgb([q(3.0 * s), q(3.0 * s - 1.0), q(3.0 * s - 2.0)]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapInfo {
    pub min: f64,
    pub max: f64,
    pub palette: Palette,
    pub width: u32,
    pub height: u32,
    pub block: u32,
}

/// Image of `block`×`block` pixels per element, top row at the largest y.
pub fn heatmap_image(
    mesh: &Mesh,
    field: FieldRef<'_>,
    palette: Palette,
    block: u32,
) -> Result<(RgbImage, HeatmapInfo), CliError> {
    field.check(mesh)?;
    if let Some(i) = field.values.iter().position(|v| !v.is_finite()) {
        return Err(
            thermotopo::Error::InvalidInput(format!("non-finite value at sample {i}")).into(),
        );
    }
    let block = block.max(1);
    let per_elem = field.per_element(mesh);
    let lo = per_elem.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_elem.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let (nx, ny) = (mesh.nx() as u32, mesh.ny() as u32);
    let img = RgbImage::from_fn(nx * block, ny * block, |px, py| {
        let i = (px / block) as usize;
        let j = (ny - 1 - py / block) as usize;
        let v = per_elem[mesh.elem_index(i, j)];
        let s = if span > 0.0 { (v - lo) / span } else { 0.0 };
        palette.color(s)
    });
    let info = HeatmapInfo {
        min: lo,
        max: hi,
        palette,
        width: nx * block,
        height: ny * block,
        block,
    };
    Ok((img, info))
}

/// Writes the PNG and a `<name>.json` sidecar with the colour range.
pub fn render_heatmap(
    mesh: &Mesh,
    field: FieldRef<'_>,
    path: &Path,
    palette: Palette,
    block: u32,
) -> Result<HeatmapInfo, CliError> {
    let (img, info) = heatmap_image(mesh, field, palette, block)?;
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| CliError::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    write_file(path, png)?;
    let sidecar = path.with_extension("json");
    let text = serde_json::to_string_pretty(&info).expect("heatmap info serializes");
    write_file(&sidecar, text + "\n")?;
    Ok(info)
}
