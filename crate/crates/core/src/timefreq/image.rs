use super::{Result, TimeFreqMap, TransformError};

/// Side length of the classifier input image.
pub const IMAGE_SIZE: usize = 32;

/// Square grayscale image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(size: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), size * size, "image must be size x size");
        Self { size, pixels }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    /// 8-bit binary PGM with pixel values `round(255·v)`.
    pub fn to_pgm(&self) -> Vec<u8> {
        encode_pgm(self.size, self.size, &quantize(&self.pixels))
    }
}

/// Pools `map` onto a `size × size` grid and min-max normalizes it.
/// A map with no dynamic range becomes all zeros.
pub fn to_image(map: &TimeFreqMap, size: usize) -> Result<Image> {
    let mut grid = pool_to_grid(map, size)?;
    normalize_in_place(&mut grid);
    Ok(Image::new(size, grid))
}

/// Block-averages `map` onto `size × size` cells (before normalization).
///
/// Output row `i` covers source rows `[i·R/size, (i+1)·R/size)`; a source
/// row partly inside that interval contributes in proportion to the overlap.
/// Columns work the same way, so every cell is an area-weighted mean and
/// the grid mean equals the map mean.
pub fn pool_to_grid(map: &TimeFreqMap, size: usize) -> Result<Vec<f64>> {
    if map.rows() == 0 || map.cols() == 0 || size == 0 {
        return Err(TransformError::EmptyMap);
    }
    let row_weights = overlap_weights(map.rows(), size);
    let col_weights = overlap_weights(map.cols(), size);
    let cell_area = (map.rows() as f64 / size as f64) * (map.cols() as f64 / size as f64);

    // Pool columns first, then rows.
    let mut by_cols = vec![0.0; map.rows() * size];
    for r in 0..map.rows() {
        let row = map.row(r);
        for (j, weights) in col_weights.iter().enumerate() {
            by_cols[r * size + j] = weights.iter().map(|&(c, w)| w * row[c]).sum();
        }
    }
    let mut grid = vec![0.0; size * size];
    for (i, weights) in row_weights.iter().enumerate() {
        for j in 0..size {
            let acc: f64 = weights.iter().map(|&(r, w)| w * by_cols[r * size + j]).sum();
            grid[i * size + j] = acc / cell_area;
        }
    }
    Ok(grid)
}

/// For each of `out` target cells, the `(source index, overlap)` pairs.
fn overlap_weights(src: usize, out: usize) -> Vec<Vec<(usize, f64)>> {
    let step = src as f64 / out as f64;
    (0..out)
        .map(|i| {
            let lo = i as f64 * step;
            let hi = (i + 1) as f64 * step;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = hi.min(s as f64 + 1.0) - lo.max(s as f64);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

fn normalize_in_place(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        let span = hi - lo;
        for v in values.iter_mut() {
            *v = ((*v - lo) / span).clamp(0.0, 1.0);
        }
    } else {
        values.fill(0.0);
    }
}

fn quantize(values: &[f64]) -> Vec<u8> {
    values.iter().map(|v| (255.0 * v).round().clamp(0.0, 255.0) as u8).collect()
}

/// Full-resolution map as PGM, min-max normalized the same way as [`to_image`].
pub fn map_to_pgm(map: &TimeFreqMap) -> Vec<u8> {
    let mut values = map.values().to_vec();
    normalize_in_place(&mut values);
    encode_pgm(map.cols(), map.rows(), &quantize(&values))
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses an 8-bit binary PGM into `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?.to_string());
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let width: usize = fields[1].parse().ok()?;
    let height: usize = fields[2].parse().ok()?;
    let payload = bytes.get(pos..)?;
    (payload.len() == width * height).then(|| (width, height, payload.to_vec()))
}
