use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};

use crate::data::{FixationSet, Sample, SaliencyMap, ValueRange};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "ppm", "pgm", "pnm", "PNG", "PPM"];

/// Maps file stem to path for every image file in `dir`.
fn index_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e));
        if !is_image {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

fn decode(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_rgb(path: &Path) -> Result<Tensor<f32>> {
    let img = decode(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0f32; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            data[(c * h + y as usize) * w + x as usize] = f32::from(px[c]);
        }
    }
    Tensor::new(vec![3, h, w], data)
}

/// Reads an 8-bit grayscale map, scaled to `[0, 1]`.
pub fn read_map(path: &Path) -> Result<SaliencyMap> {
    let img = decode(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
    SaliencyMap::new(Tensor::new(vec![1, h, w], data)?, ValueRange::Unit)
}

pub(crate) fn write_rgb_png(image: &Tensor<f32>, path: &Path) -> Result<()> {
    let (_, h, w) = image.chw()?;
    let d = image.data();
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let px = |c: usize| d[(c * h + y as usize) * w + x as usize].round().clamp(0.0, 255.0) as u8;
        image::Rgb([px(0), px(1), px(2)])
    });
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a map as an 8-bit grayscale PNG.
pub fn write_map_png(map: &SaliencyMap, path: &Path) -> Result<()> {
    let img = GrayImage::from_raw(map.width() as u32, map.height() as u32, map.to_bytes())
        .expect("buffer matches extents");
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the map as 32-bit little-endian floats after a `salmap f32le H W`
/// header line.
pub fn write_map_raw(map: &SaliencyMap, path: &Path) -> Result<()> {
    let mut out = format!("salmap f32le {} {}\n", map.height(), map.width()).into_bytes();
    for &v in map.values().data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses `x,y` lines (0-indexed). Blank lines and `#` comments are skipped.
pub fn read_fixations(path: &Path) -> Result<FixationSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(x, y)| {
            Some((x.trim().parse::<usize>().ok()?, y.trim().parse::<usize>().ok()?))
        });
        match parsed {
            Some(p) => points.push(p),
            None => {
                return Err(Error::data(
                    path.display().to_string(),
                    format!("line {}: expected `x,y`, got `{line}`", n + 1),
                ))
            }
        }
    }
    Ok(FixationSet::new(points))
}

pub fn write_fixations(fix: &FixationSet, path: &Path) -> Result<()> {
    let mut s = String::with_capacity(fix.len() * 8);
    for (x, y) in &fix.points {
        s.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Loads `root/images`, with optional `root/maps` and `root/fixations`
/// entries matched by file stem. Samples are ordered by id.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let root = root.as_ref();
    let images_dir = root.join("images");
    if !images_dir.is_dir() {
        return Err(Error::io(
            &images_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "missing images directory"),
        ));
    }
    let images = index_images(&images_dir)?;
    let maps_dir = root.join("maps");
    let maps = if maps_dir.is_dir() {
        index_images(&maps_dir)?
    } else {
        BTreeMap::new()
    };
    let fix_dir = root.join("fixations");

    let mut samples = Vec::with_capacity(images.len());
    for (id, path) in images {
        let image = read_rgb(&path).map_err(|e| Error::data(&id, e.to_string()))?;
        let gt_map = maps
            .get(&id)
            .map(|p| read_map(p))
            .transpose()
            .map_err(|e| Error::data(&id, e.to_string()))?;
        let fix_path = fix_dir.join(format!("{id}.txt"));
        let fixations = if fix_path.is_file() {
            Some(read_fixations(&fix_path).map_err(|e| Error::data(&id, e.to_string()))?)
        } else {
            None
        };
        let sample = Sample {
            id,
            image,
            gt_map,
            fixations,
        };
        sample.validate()?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes samples in the layout read by [`load_dataset`].
pub fn save_dataset(samples: &[Sample], root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    for sub in ["images", "maps", "fixations"] {
        let dir = root.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for s in samples {
        write_rgb_png(&s.image, &root.join("images").join(format!("{}.png", s.id)))?;
        if let Some(map) = &s.gt_map {
            write_map_png(map, &root.join("maps").join(format!("{}.png", s.id)))?;
        }
        if let Some(fix) = &s.fixations {
            write_fixations(fix, &root.join("fixations").join(format!("{}.txt", s.id)))?;
        }
    }
    Ok(())
}
