//! Grayscale morphology with a discrete disk structuring element.
//!
//! The disk is decomposed into one horizontal run per row offset; each run is
//! a 1D min/max filter computed with the van Herk / Gil-Werman recurrence, so
//! the cost is independent of the run length.

/// Half-widths of the disk rows for offsets `-r..=r`: `w(dy) = ⌊√(r² − dy²)⌋`.
pub(crate) fn disk_half_widths(radius_cells: f64) -> Vec<usize> {
    let r = radius_cells.floor() as i64;
    let r2 = radius_cells * radius_cells;
    (-r..=r)
        .map(|dy| {
            let rem = r2 - (dy * dy) as f64;
            // guard against sqrt landing just below an integer
            let mut w = rem.max(0.0).sqrt().floor() as i64;
            while ((w + 1) * (w + 1)) as f64 <= rem {
                w += 1;
            }
            while w > 0 && (w * w) as f64 > rem {
                w -= 1;
            }
            w as usize
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Op {
    Min,
    Max,
}

impl Op {
    #[inline]
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Op::Min => a.min(b),
            Op::Max => a.max(b),
        }
    }

    fn identity(self) -> f64 {
        match self {
            Op::Min => f64::INFINITY,
            Op::Max => f64::NEG_INFINITY,
        }
    }
}

/// 1D sliding window filter over `[i - w, i + w]`, off-row samples ignored.
fn filter_row(row: &[f64], w: usize, op: Op, out: &mut [f64], g: &mut Vec<f64>, h: &mut Vec<f64>) {
    let n = row.len();
    if w == 0 {
        out.copy_from_slice(row);
        return;
    }
    let k = 2 * w + 1;
    // padded with w identity samples on both sides
    let len = n + 2 * w;
    let at = |i: usize| if i < w || i >= w + n { op.identity() } else { row[i - w] };
    g.clear();
    h.clear();
    g.resize(len, 0.0);
    h.resize(len, 0.0);
    for i in 0..len {
        g[i] = if i % k == 0 { at(i) } else { op.pick(g[i - 1], at(i)) };
    }
    for i in (0..len).rev() {
        h[i] = if i % k == k - 1 || i == len - 1 { at(i) } else { op.pick(h[i + 1], at(i)) };
    }
    for (i, o) in out.iter_mut().enumerate() {
        // window [i, i + 2w] in padded coordinates
        *o = op.pick(h[i], g[i + 2 * w]);
    }
}

fn morph(values: &[f64], width: usize, height: usize, radius_cells: f64, op: Op) -> Vec<f64> {
    let widths = disk_half_widths(radius_cells);
    let r = (widths.len() / 2) as i64;
    let mut distinct: Vec<usize> = widths.clone();
    distinct.sort_unstable();
    distinct.dedup();
    // filtered[k][row] = row filtered with half-width distinct[k]
    let mut filtered = vec![vec![0.0; width * height]; distinct.len()];
    let (mut g, mut h) = (Vec::new(), Vec::new());
    for (k, &w) in distinct.iter().enumerate() {
        for row in 0..height {
            let src = &values[row * width..(row + 1) * width];
            let dst = &mut filtered[k][row * width..(row + 1) * width];
            filter_row(src, w, op, dst, &mut g, &mut h);
        }
    }
    let slot: Vec<usize> = widths
        .iter()
        .map(|w| distinct.binary_search(w).unwrap())
        .collect();
    let mut out = vec![op.identity(); width * height];
    for row in 0..height as i64 {
        for dy in -r..=r {
            let src_row = row + dy;
            if src_row < 0 || src_row >= height as i64 {
                continue;
            }
            let f = &filtered[slot[(dy + r) as usize]];
            let src = &f[src_row as usize * width..(src_row as usize + 1) * width];
            let dst = &mut out[row as usize * width..(row as usize + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d = op.pick(*d, *s);
            }
        }
    }
    out
}

/// Erosion; NaN samples are ignored.
pub fn erode(values: &[f64], width: usize, height: usize, radius_cells: f64) -> Vec<f64> {
    let clean: Vec<f64> = values.iter().map(|v| if v.is_nan() { f64::INFINITY } else { *v }).collect();
    morph(&clean, width, height, radius_cells, Op::Min)
}

/// Dilation; NaN samples are ignored.
pub fn dilate(values: &[f64], width: usize, height: usize, radius_cells: f64) -> Vec<f64> {
    let clean: Vec<f64> = values.iter().map(|v| if v.is_nan() { f64::NEG_INFINITY } else { *v }).collect();
    morph(&clean, width, height, radius_cells, Op::Max)
}

/// Erosion followed by dilation with the same disk.
pub fn opening(values: &[f64], width: usize, height: usize, radius_cells: f64) -> Vec<f64> {
    dilate(&erode(values, width, height, radius_cells), width, height, radius_cells)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn brute(values: &[f64], w: usize, h: usize, r: f64, min: bool) -> Vec<f64> {
        let ri = r.floor() as i64;
        let mut out = vec![0.0; w * h];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut acc = if min { f64::INFINITY } else { f64::NEG_INFINITY };
                for dy in -ri..=ri {
                    for dx in -ri..=ri {
                        if ((dx * dx + dy * dy) as f64) > r * r {
                            continue;
                        }
                        let (xx, yy) = (x + dx, y + dy);
                        if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                            continue;
                        }
                        let v = values[(yy as usize) * w + xx as usize];
                        acc = if min { acc.min(v) } else { acc.max(v) };
                    }
                }
                out[(y as usize) * w + x as usize] = acc;
            }
        }
        out
    }

    #[test]
    fn disk_widths() {
        assert_eq!(disk_half_widths(3.0), vec![0, 2, 2, 3, 2, 2, 0]);
        assert_eq!(disk_half_widths(1.0), vec![0, 1, 0]);
        assert_eq!(disk_half_widths(0.5), vec![0]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (w, h) = (rng.gen_range(1..25), rng.gen_range(1..25));
            let r = rng.gen_range(0.0..6.0);
            let v: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0..10) as f64).collect();
            assert_eq!(erode(&v, w, h, r), brute(&v, w, h, r, true));
            assert_eq!(dilate(&v, w, h, r), brute(&v, w, h, r, false));
        }
    }
}
