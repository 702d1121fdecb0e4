use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::{Error, Frame, Mask, Plane, Result};

/// Luma with weights 0.299 / 0.587 / 0.114, rounded.
pub fn rgb_to_luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}

/// Reads an 8-bit PNG, PGM or JPEG as a grayscale frame.
pub fn load_image(path: &Path) -> Result<Frame> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match img.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm | ImageFormat::Jpeg) => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "{}: unsupported image format {other:?}",
                path.display()
            )))
        }
    }
    let decoded = img.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| rgb_to_luma(p[0], p[1], p[2]))
            .collect(),
    };
    Plane::new(w, h, data)
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") | Some("pnm") => Ok(ImageFormat::Pnm),
        _ => Err(Error::InvalidInput(format!(
            "{}: unsupported output format (use .png or .pgm)",
            path.display()
        ))),
    }
}

/// Writes any 8-bit plane as PNG or PGM, chosen by extension.
pub fn save_image(plane: &Plane, path: &Path) -> Result<()> {
    let format = format_for(path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    image::save_buffer_with_format(
        path,
        plane.data(),
        plane.width() as u32,
        plane.height() as u32,
        image::ExtendedColorType::L8,
        format,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a binary mask; anything other than `{0, 255}` is rejected.
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    mask.ensure_binary(&format!("mask {}", path.display()))?;
    save_image(mask, path)
}

/// Nearest-neighbour resize (pixel centres aligned). Output values are a
/// subset of the input values.
pub fn resize_mask_nn(mask: &Mask, width: usize, height: usize) -> Result<Mask> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "resize target must be nonzero, got {width}x{height}"
        )));
    }
    let (sw, sh) = mask.dims();
    if (sw, sh) == (width, height) {
        return Ok(mask.clone());
    }
    let xs: Vec<usize> = (0..width).map(|x| ((2 * x + 1) * sw / (2 * width)).min(sw - 1)).collect();
    let ys: Vec<usize> = (0..height).map(|y| ((2 * y + 1) * sh / (2 * height)).min(sh - 1)).collect();
    Ok(Plane::from_fn(width, height, |x, y| mask.get(xs[x], ys[y])))
}
