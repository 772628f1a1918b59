//! Exact Euclidean nearest-neighbor fill in two separable passes.
//!
//! The column pass finds, for every pixel, the nearest valid row in its own
//! column. The row pass takes the lower envelope of the parabolas
//! `(x - q)^2 + dy(q)^2` with exact integer arithmetic. Parabolas that meet
//! the envelope at a single point are kept so that equidistant candidates
//! can be ranked by (row, column).

use super::{DepthMap, MapRole};
use crate::error::{Error, Result};

/// Fill every empty pixel with the value of its nearest valid pixel; ties go
/// to the smaller row, then the smaller column.
pub fn dt_fill(m: &DepthMap) -> Result<DepthMap> {
    let (h, w) = (m.height(), m.width());
    if m.valid_count() == 0 {
        return Err(Error::Input("distance transform needs at least one valid pixel".into()));
    }

    // The downward sweep records the nearest valid row at or above each
    // pixel. The upward sweep settles the column minimum for one row at a
    // time, runs the row pass on it and overwrites that row with the result.
    const NONE: u32 = u32::MAX;
    let vals = m.values();
    let mut buf = vec![NONE; h * w];
    let mut col_best = vec![NONE; w];
    for row in 0..h {
        let line = &vals[row * w..(row + 1) * w];
        for (col, &v) in line.iter().enumerate() {
            if v > 0 {
                col_best[col] = row as u32;
            }
        }
        buf[row * w..(row + 1) * w].copy_from_slice(&col_best);
    }

    let mut below = vec![NONE; w];
    let mut env = Envelope::with_capacity(w);
    for row in (0..h).rev() {
        let r = row as u32;
        let line = &vals[row * w..(row + 1) * w];
        let slots = &mut buf[row * w..(row + 1) * w];
        env.clear();
        for (col, (&v, &above)) in line.iter().zip(slots.iter()).enumerate() {
            if v > 0 {
                below[col] = r;
            }
            let b = below[col];
            let best = match (above != NONE, b != NONE) {
                (true, true) => if r - above <= b - r { above } else { b },
                (true, false) => above,
                _ => b,
            };
            if best != NONE {
                let dy = best.abs_diff(r) as i64;
                env.push(col as i64, dy * dy, best as usize);
            }
        }
        env.finish();
        for (col, px) in slots.iter_mut().enumerate() {
            let (br, bc) = env.query(col as i64);
            *px = vals[br * w + bc as usize];
        }
    }
    let out = DepthMap::new(h, w, buf, MapRole::Coarse)?;
    Ok(out)
}

/// Exact intersection abscissa `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy)]
struct Frac {
    num: i64,
    den: i64,
}

impl Frac {
    fn lt(self, other: Frac) -> bool {
        (self.num as i128) * (other.den as i128) < (other.num as i128) * (self.den as i128)
    }

    fn le_int(self, x: i64) -> bool {
        self.num <= x * self.den
    }

    fn lt_int(self, x: i64) -> bool {
        self.num < x * self.den
    }
}

#[derive(Debug, Clone, Copy)]
struct Parabola {
    q: i64,
    g2: i64,
    row: usize,
}

impl Parabola {
    fn at(&self, x: i64) -> i64 {
        (x - self.q) * (x - self.q) + self.g2
    }
}

struct Envelope {
    v: Vec<Parabola>,
    // z[k] is the left end of v[k]'s interval; z[0] is -inf.
    z: Vec<Option<Frac>>,
    cursor: usize,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Envelope {
            v: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            cursor: 0,
        }
    }

    fn clear(&mut self) {
        self.v.clear();
        self.z.clear();
        self.cursor = 0;
    }

    fn push(&mut self, q: i64, g2: i64, row: usize) {
        let p = Parabola { q, g2, row };
        loop {
            let Some(top) = self.v.last() else {
                self.v.push(p);
                self.z.push(None);
                return;
            };
            let s = Frac {
                num: (p.g2 + p.q * p.q) - (top.g2 + top.q * top.q),
                den: 2 * (p.q - top.q),
            };
            match self.z[self.z.len() - 1] {
                Some(zk) if s.lt(zk) => {
                    self.v.pop();
                    self.z.pop();
                }
                _ => {
                    self.v.push(p);
                    self.z.push(Some(s));
                    return;
                }
            }
        }
    }

    fn finish(&mut self) {
        self.cursor = 0;
    }

    /// Best `(row, col)` for column `x`; queries must come in increasing `x`.
    fn query(&mut self, x: i64) -> (usize, i64) {
        while self.cursor + 1 < self.v.len()
            && self.z[self.cursor + 1].is_some_and(|z| z.lt_int(x))
        {
            self.cursor += 1;
        }
        let mut best = self.v[self.cursor];
        let mut key = (best.at(x), best.row, best.q);
        let mut j = self.cursor + 1;
        while j < self.v.len() && self.z[j].is_some_and(|z| z.le_int(x)) {
            let p = self.v[j];
            let k = (p.at(x), p.row, p.q);
            if k < key {
                best = p;
                key = k;
            }
            j += 1;
        }
        (best.row, best.q)
    }
}

/// O(N·M) reference: scan every valid pixel for every empty one.
pub fn dt_fill_brute_force(m: &DepthMap) -> Result<DepthMap> {
    let valid: Vec<(usize, usize)> = (0..m.height())
        .flat_map(|r| (0..m.width()).map(move |c| (r, c)))
        .filter(|&(r, c)| m.get(r, c) > 0)
        .collect();
    if valid.is_empty() {
        return Err(Error::Input("distance transform needs at least one valid pixel".into()));
    }
    let mut out = m.clone().with_role(MapRole::Coarse);
    for row in 0..m.height() {
        for col in 0..m.width() {
            if m.get(row, col) > 0 {
                continue;
            }
            let &(r, c) = valid
                .iter()
                .min_by_key(|&&(r, c)| {
                    let dy = r.abs_diff(row);
                    let dx = c.abs_diff(col);
                    (dy * dy + dx * dx, r, c)
                })
                .expect("non-empty");
            out.set(row, col, m.get(r, c));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(h: usize, w: usize, v: Vec<u32>) -> DepthMap {
        DepthMap::new(h, w, v, MapRole::Sparse).unwrap()
    }

    #[test]
    fn single_pixel_floods() {
        let mut m = DepthMap::empty(5, 7, MapRole::Sparse);
        m.set(3, 2, 42);
        assert!(dt_fill(&m).unwrap().values().iter().all(|&v| v == 42));
    }

    #[test]
    fn one_row_example() {
        let m = map(1, 4, vec![10, 0, 0, 20]);
        assert_eq!(dt_fill(&m).unwrap().values(), &[10, 10, 20, 20]);
    }

    #[test]
    fn ties_prefer_row_then_column() {
        // (1,1) is equidistant from all four; (0,1) wins on row.
        let m = map(3, 3, vec![0, 1, 0, 2, 0, 3, 0, 4, 0]);
        assert_eq!(dt_fill(&m).unwrap().get(1, 1), 1);
        // left/right tie on the same row: smaller column wins.
        let m = map(1, 3, vec![7, 0, 9]);
        assert_eq!(dt_fill(&m).unwrap().get(0, 1), 7);
        // diagonal tie: (0,2) vs (2,0) from (1,1) -> row 0.
        let m = map(3, 3, vec![0, 0, 5, 0, 0, 0, 6, 0, 0]);
        assert_eq!(dt_fill(&m).unwrap().get(1, 1), 5);
    }

    #[test]
    fn empty_map_is_error() {
        assert!(dt_fill(&DepthMap::empty(4, 4, MapRole::Sparse)).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..60 {
            let density = 0.01 + 0.19 * (case as f64 / 60.0);
            let v = (0..64 * 48)
                .map(|_| if rng.gen_bool(density) { rng.gen_range(1..5) } else { 0 })
                .collect();
            let m = map(64, 48, v);
            if m.valid_count() == 0 {
                continue;
            }
            assert_eq!(dt_fill(&m).unwrap(), dt_fill_brute_force(&m).unwrap(), "case {case}");
        }
    }

    fn sparse(max: usize) -> impl Strategy<Value = DepthMap> {
        (1..max, 1..max).prop_flat_map(|(h, w)| {
            prop::collection::vec(prop_oneof![4 => Just(0u32), 1 => 1u32..4], h * w)
                .prop_filter("needs a valid pixel", |v| v.iter().any(|&x| x > 0))
                .prop_map(move |v| DepthMap::new(h, w, v, MapRole::Sparse).unwrap())
        })
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(m in sparse(20)) {
            prop_assert_eq!(dt_fill(&m).unwrap(), dt_fill_brute_force(&m).unwrap());
        }

        #[test]
        fn idempotent_and_closed(m in sparse(16)) {
            let once = dt_fill(&m).unwrap();
            prop_assert_eq!(dt_fill(&once).unwrap(), once.clone());
            for (i, &v) in once.values().iter().enumerate() {
                prop_assert!(m.values().contains(&v));
                if m.values()[i] > 0 {
                    prop_assert_eq!(v, m.values()[i]);
                }
            }
        }
    }
}
