//! Spatial indices for the samplers: a cell list for neighbour queries and a
//! coverage lattice for union-of-discs areas.

use std::collections::HashMap;

use crate::grid::Rect;

/// Cell list over a rectangle; points carry a stable id.
#[derive(Clone, Debug)]
pub(crate) struct CellIndex {
    rect: Rect,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
    points: Vec<[f64; 2]>,
    ids: Vec<u64>,
    slot_of: HashMap<u64, usize>,
}

impl CellIndex {
    pub fn new(rect: Rect, cell: f64) -> Self {
        let cell = cell.max(1e-9);
        let nx = ((rect.width() / cell).ceil() as usize).max(1);
        let ny = ((rect.height() / cell).ceil() as usize).max(1);
        Self {
            rect,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
            points: Vec::new(),
            ids: Vec::new(),
            slot_of: HashMap::new(),
        }
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let cx = (((p[0] - self.rect.x0) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((p[1] - self.rect.y0) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    #[cfg(test)]
    pub fn contains_id(&self, id: u64) -> bool {
        self.slot_of.contains_key(&id)
    }

    pub fn insert(&mut self, id: u64, p: [f64; 2]) {
        let slot = self.points.len();
        let (cx, cy) = self.cell_of(p);
        self.cells[cy * self.nx + cx].push(slot);
        self.points.push(p);
        self.ids.push(id);
        self.slot_of.insert(id, slot);
    }

    /// Removes the point in `slot`; the last point takes its place.
    pub fn remove_slot(&mut self, slot: usize) -> (u64, [f64; 2]) {
        let p = self.points[slot];
        let id = self.ids[slot];
        let (cx, cy) = self.cell_of(p);
        let cell = &mut self.cells[cy * self.nx + cx];
        let k = cell.iter().position(|&s| s == slot).expect("indexed point");
        cell.swap_remove(k);
        let last = self.points.len() - 1;
        if slot != last {
            let q = self.points[last];
            let (qx, qy) = self.cell_of(q);
            let qcell = &mut self.cells[qy * self.nx + qx];
            let k = qcell.iter().position(|&s| s == last).expect("indexed point");
            qcell[k] = slot;
            self.slot_of.insert(self.ids[last], slot);
        }
        self.points.swap_remove(slot);
        self.ids.swap_remove(slot);
        self.slot_of.remove(&id);
        (id, p)
    }

    pub fn remove_id(&mut self, id: u64) -> bool {
        match self.slot_of.get(&id).copied() {
            Some(slot) => {
                self.remove_slot(slot);
                true
            }
            None => false,
        }
    }

    /// Calls `f` with every point within distance `r` of `p` (closed ball).
    pub fn for_each_within(&self, p: [f64; 2], r: f64, mut f: impl FnMut([f64; 2])) {
        let reach = (r / self.cell).ceil() as i64;
        let (cx, cy) = self.cell_of(p);
        let r2 = r * r;
        for dy in -reach..=reach {
            let y = cy as i64 + dy;
            if y < 0 || y >= self.ny as i64 {
                continue;
            }
            for dx in -reach..=reach {
                let x = cx as i64 + dx;
                if x < 0 || x >= self.nx as i64 {
                    continue;
                }
                for &slot in &self.cells[y as usize * self.nx + x as usize] {
                    let q = self.points[slot];
                    if (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) <= r2 {
                        f(q);
                    }
                }
            }
        }
    }

    pub fn any_within(&self, p: [f64; 2], r: f64) -> bool {
        let mut hit = false;
        self.for_each_within(p, r, |_| hit = true);
        hit
    }
}

/// Fine node lattice over a rectangle counting how many discs of radius `r`
/// cover each node. `cell_area · #covered nodes` is the discretized area of
/// the union of discs, so birth/death area increments are exact differences
/// of one global function.
#[derive(Clone, Debug)]
pub(crate) struct CoverageLattice {
    rect: Rect,
    r: f64,
    nx: usize,
    ny: usize,
    counts: Vec<u16>,
}

impl CoverageLattice {
    pub fn new(rect: Rect, r: f64, nodes_per_radius: usize) -> Self {
        let spacing = r / nodes_per_radius.max(1) as f64;
        let nx = ((rect.width() / spacing).round() as usize).max(1);
        let ny = ((rect.height() / spacing).round() as usize).max(1);
        Self { rect, r, nx, ny, counts: vec![0; nx * ny] }
    }

    fn node_area(&self) -> f64 {
        (self.rect.width() / self.nx as f64) * (self.rect.height() / self.ny as f64)
    }

    fn for_each_node(&self, p: [f64; 2], mut f: impl FnMut(usize)) {
        let sx = self.rect.width() / self.nx as f64;
        let sy = self.rect.height() / self.ny as f64;
        let i0 = (((p[0] - self.r - self.rect.x0) / sx - 0.5).floor().max(0.0)) as usize;
        let i1 = ((((p[0] + self.r - self.rect.x0) / sx - 0.5).ceil().max(0.0)) as usize).min(self.nx - 1);
        let j0 = (((p[1] - self.r - self.rect.y0) / sy - 0.5).floor().max(0.0)) as usize;
        let j1 = ((((p[1] + self.r - self.rect.y0) / sy - 0.5).ceil().max(0.0)) as usize).min(self.ny - 1);
        let r2 = self.r * self.r;
        for j in j0..=j1 {
            let y = self.rect.y0 + (j as f64 + 0.5) * sy;
            for i in i0..=i1 {
                let x = self.rect.x0 + (i as f64 + 0.5) * sx;
                if (x - p[0]).powi(2) + (y - p[1]).powi(2) <= r2 {
                    f(j * self.nx + i);
                }
            }
        }
    }

    /// Area that a disc at `p` would add to the current union.
    pub fn added_area(&self, p: [f64; 2]) -> f64 {
        let mut n = 0usize;
        self.for_each_node(p, |k| n += (self.counts[k] == 0) as usize);
        n as f64 * self.node_area()
    }

    /// Area covered only by the disc at `p` (which must be present).
    pub fn unique_area(&self, p: [f64; 2]) -> f64 {
        let mut n = 0usize;
        self.for_each_node(p, |k| n += (self.counts[k] == 1) as usize);
        n as f64 * self.node_area()
    }

    /// Upper bound on [`added_area`](Self::added_area) of a single disc:
    /// every node within `r` of `p` is within `r + s/√2` of the node nearest
    /// to `p`.
    pub fn max_disc_area(&self) -> f64 {
        let sx = self.rect.width() / self.nx as f64;
        let sy = self.rect.height() / self.ny as f64;
        let reach = self.r + 0.5 * (sx * sx + sy * sy).sqrt();
        let (kx, ky) = ((reach / sx).ceil() as i64, (reach / sy).ceil() as i64);
        let mut n = 0usize;
        for dj in -ky..=ky {
            for di in -kx..=kx {
                if (di as f64 * sx).powi(2) + (dj as f64 * sy).powi(2) <= reach * reach {
                    n += 1;
                }
            }
        }
        n as f64 * self.node_area()
    }

    pub fn add(&mut self, p: [f64; 2]) {
        let mut idx = Vec::new();
        self.for_each_node(p, |k| idx.push(k));
        for k in idx {
            self.counts[k] += 1;
        }
    }

    pub fn remove(&mut self, p: [f64; 2]) {
        let mut idx = Vec::new();
        self.for_each_node(p, |k| idx.push(k));
        for k in idx {
            self.counts[k] -= 1;
        }
    }

    #[cfg(test)]
    pub fn covered_area(&self) -> f64 {
        self.counts.iter().filter(|&&c| c > 0).count() as f64 * self.node_area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_index_insert_remove() {
        let mut ix = CellIndex::new(Rect::new(0.0, 4.0, 0.0, 4.0), 1.0);
        ix.insert(1, [0.5, 0.5]);
        ix.insert(2, [1.2, 0.5]);
        ix.insert(3, [3.5, 3.5]);
        assert!(ix.any_within([0.9, 0.5], 0.4));
        assert!(!ix.any_within([2.5, 2.5], 0.5));
        assert!(ix.remove_id(1));
        assert!(!ix.remove_id(1));
        assert_eq!(ix.len(), 2);
        assert!(ix.any_within([1.2, 0.6], 0.2));
        assert!(ix.any_within([3.4, 3.4], 0.2));
        let (id, _) = ix.remove_slot(0);
        assert!(!ix.contains_id(id));
        assert_eq!(ix.len(), 1);
    }

    #[test]
    fn lattice_disc_area() {
        let mut lat = CoverageLattice::new(Rect::new(0.0, 4.0, 0.0, 4.0), 1.0, 16);
        let a = lat.added_area([2.0, 2.0]);
        assert!((a - std::f64::consts::PI).abs() < 0.05, "{a}");
        lat.add([2.0, 2.0]);
        assert_eq!(lat.added_area([2.0, 2.0]), 0.0);
        assert!((lat.unique_area([2.0, 2.0]) - a).abs() < 1e-12);
        assert!(lat.max_disc_area() >= a);
        lat.add([2.5, 2.0]);
        assert!(lat.covered_area() > a);
        lat.remove([2.5, 2.0]);
        assert!((lat.covered_area() - a).abs() < 1e-12);
    }
}
