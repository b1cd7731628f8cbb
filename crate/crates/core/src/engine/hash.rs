//! Uniform-grid spatial hash over enzyme positions.
//!
//! The grid covers a fixed box and stores indices in a flat counting-sort
//! layout. Points outside the box are clamped into the boundary cells, so a
//! query still finds every point within `cell_size` of the query position.

use crate::vec3::Vec3;

#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell_size: f64,
    inv_cell: f64,
    origin: Vec3,
    dims: [usize; 3],
    // cell c holds entries[starts[c]..starts[c + 1]]
    starts: Vec<u32>,
    entries: Vec<u32>,
    cell_of: Vec<(u32, u32)>,
    // one bit per cell
    active: Vec<u64>,
}

impl SpatialHash {
    /// Grid over `[min, max]` with cubic cells of at least `cell_size`.
    pub fn new(min: Vec3, max: Vec3, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let dims = [0, 1, 2].map(|d| (((max[d] - min[d]) / cell_size).floor() as usize).max(1));
        let cells = dims[0] * dims[1] * dims[2];
        SpatialHash {
            cell_size,
            inv_cell: 1.0 / cell_size,
            origin: min,
            dims,
            starts: vec![0; cells + 1],
            entries: Vec::new(),
            cell_of: Vec::new(),
            active: Vec::new(),
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn axis_index(&self, x: f64, axis: usize) -> usize {
        let i = (x - self.origin[axis]) * self.inv_cell;
        // truncation equals floor for positive values; NaN lands in cell 0
        if i > 0.0 {
            (i as usize).min(self.dims[axis] - 1)
        } else {
            0
        }
    }

    /// Integer coordinates of the cell holding `p`.
    #[inline]
    pub fn cell_coords(&self, p: &Vec3) -> [usize; 3] {
        [
            self.axis_index(p[0], 0),
            self.axis_index(p[1], 1),
            self.axis_index(p[2], 2),
        ]
    }

    #[inline]
    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    /// Re-index all `points`; index `i` refers to `points[i]`.
    pub fn rebuild(&mut self, points: &[Vec3]) {
        self.index(points, |_| true);
    }

    /// Like [`rebuild`](Self::rebuild), but only points in cells that some
    /// `for_each_near(q, radius)` with `q` in `queries` would visit are kept.
    /// Those queries see exactly what they would after a full rebuild.
    pub fn rebuild_near(&mut self, points: &[Vec3], queries: &[Vec3], radius: f64) {
        let mut active = std::mem::take(&mut self.active);
        active.clear();
        active.resize((self.starts.len() - 1).div_ceil(64), 0);
        for q in queries {
            let lo = [0, 1, 2].map(|d| self.axis_index(q[d] - radius, d));
            let hi = [0, 1, 2].map(|d| self.axis_index(q[d] + radius, d));
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    let row = (x * self.dims[1] + y) * self.dims[2];
                    for c in row + lo[2]..=row + hi[2] {
                        active[c / 64] |= 1 << (c % 64);
                    }
                }
            }
        }
        self.index(points, |c| active[c / 64] >> (c % 64) & 1 == 1);
        self.active = active;
    }

    fn index(&mut self, points: &[Vec3], keep_cell: impl Fn(usize) -> bool) {
        let cells = self.starts.len() - 1;
        self.starts.iter_mut().for_each(|s| *s = 0);
        self.cell_of.clear();
        for (i, p) in points.iter().enumerate() {
            let c = self.flat(self.cell_coords(p));
            if keep_cell(c) {
                self.cell_of.push((c as u32, i as u32));
                self.starts[c + 1] += 1;
            }
        }
        for c in 0..cells {
            self.starts[c + 1] += self.starts[c];
        }
        self.entries.clear();
        self.entries.resize(self.cell_of.len(), 0);
        let mut cursor: Vec<u32> = self.starts[..cells].to_vec();
        for &(c, i) in &self.cell_of {
            let slot = &mut cursor[c as usize];
            self.entries[*slot as usize] = i;
            *slot += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cell_entries(&self, c: [usize; 3]) -> &[u32] {
        let f = self.flat(c);
        &self.entries[self.starts[f] as usize..self.starts[f + 1] as usize]
    }

    /// Visit every indexed point in cells overlapping the cube of half-width
    /// `radius` around `p`. With `radius <= cell_size` this is a subset of the
    /// 27-cell neighborhood of `p`'s cell.
    #[inline]
    pub fn for_each_near(&self, p: &Vec3, radius: f64, mut visit: impl FnMut(u32)) {
        let lo = [0, 1, 2].map(|d| self.axis_index(p[d] - radius, d));
        let hi = [0, 1, 2].map(|d| self.axis_index(p[d] + radius, d));
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                let row = (x * self.dims[1] + y) * self.dims[2];
                let start = self.starts[row + lo[2]] as usize;
                let end = self.starts[row + hi[2] + 1] as usize;
                for &i in &self.entries[start..end] {
                    visit(i);
                }
            }
        }
    }
}
