//! Binary occupancy raster and its disk-stencil inflation.
//!
//! Cells are indexed `(col, row)` with row 0 at the bottom (smallest y). The
//! origin is the world position of the lower-left corner of cell `(0, 0)`.
//! Anything outside the raster counts as occupied.

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::par::Exec;

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Point,
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, origin: Point, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::invalid("resolution must be positive"));
        }
        if !origin.x.is_finite() || !origin.y.is_finite() {
            return Err(Error::invalid("origin must be finite"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid must have at least one cell"));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            cells: vec![false; width * height],
        })
    }

    /// Grid covering `extents`, sized to the nearest whole cell.
    pub fn covering(extents: Rect, resolution: f64) -> Result<Self> {
        if !extents.is_valid() {
            return Err(Error::invalid("extents must have positive size"));
        }
        let cols = cells_spanning(extents.width(), resolution)?;
        let rows = cells_spanning(extents.height(), resolution)?;
        Self::new(
            resolution,
            Point::new(extents.xmin, extents.ymin),
            cols,
            rows,
        )
    }

    /// Parses a `.`/`#` raster whose first line is the top row.
    pub fn from_ascii<S: AsRef<str>>(lines: &[S], resolution: f64, origin: Point) -> Result<Self> {
        let height = lines.len();
        let width = lines.first().map_or(0, |l| l.as_ref().chars().count());
        let mut grid = Self::new(resolution, origin, width, height)?;
        for (i, line) in lines.iter().enumerate() {
            let line = line.as_ref();
            if line.chars().count() != width {
                return Err(Error::invalid(format!(
                    "ascii row {i} has {} columns, expected {width}",
                    line.chars().count()
                )));
            }
            let row = height - 1 - i;
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => grid.set(col, row, true),
                    other => {
                        return Err(Error::invalid(format!(
                            "unexpected map character {other:?} in ascii row {i}"
                        )))
                    }
                }
            }
        }
        Ok(grid)
    }

    pub fn to_ascii(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|row| {
                (0..self.width)
                    .map(|col| if self.get(col, row) { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn origin(&self) -> Point {
        self.origin
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn extents(&self) -> Rect {
        Rect::new(
            self.origin.x,
            self.origin.y,
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }

    #[inline]
    fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.cells[self.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, occupied: bool) {
        let i = self.index(col, row);
        self.cells[i] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Cell containing `p`, or `None` outside the raster. Floor binning: a
    /// point on a cell's upper edge belongs to the next cell.
    #[inline]
    pub fn world_to_cell(&self, p: Point) -> Option<(usize, usize)> {
        let cx = ((p.x - self.origin.x) / self.resolution).floor();
        let cy = ((p.y - self.origin.y) / self.resolution).floor();
        if cx >= 0.0 && cy >= 0.0 && cx < self.width as f64 && cy < self.height as f64 {
            Some((cx as usize, cy as usize))
        } else {
            None
        }
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Result<Point> {
        if col >= self.width || row >= self.height {
            return Err(Error::invalid(format!(
                "cell ({col}, {row}) outside {}x{} grid",
                self.width, self.height
            )));
        }
        Ok(self.center_unchecked(col, row))
    }

    #[inline]
    fn center_unchecked(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Closed square covered by a cell.
    pub fn cell_rect(&self, col: usize, row: usize) -> Rect {
        let x0 = self.origin.x + col as f64 * self.resolution;
        let y0 = self.origin.y + row as f64 * self.resolution;
        Rect::new(x0, y0, x0 + self.resolution, y0 + self.resolution)
    }

    #[inline]
    pub fn is_occupied(&self, p: Point) -> bool {
        match self.world_to_cell(p) {
            Some((c, r)) => self.cells[self.index(c, r)],
            None => true,
        }
    }

    /// Marks every cell whose center lies in the closed rectangle.
    pub fn mark_rect_centers(&mut self, rect: &Rect) {
        let Some((c0, c1)) = self.center_span(rect.xmin, rect.xmax, self.origin.x, self.width)
        else {
            return;
        };
        let Some((r0, r1)) = self.center_span(rect.ymin, rect.ymax, self.origin.y, self.height)
        else {
            return;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let c = self.center_unchecked(col, row);
                if rect.contains(c) {
                    self.set(col, row, true);
                }
            }
        }
    }

    /// Marks every cell whose square overlaps the rectangle with positive
    /// area. Every point of the closed rectangle then lies in a marked cell.
    pub fn mark_rect_overlap(&mut self, rect: &Rect) {
        let res = self.resolution;
        let span = |lo: f64, hi: f64, origin: f64, n: usize| -> Option<(usize, usize)> {
            let a = ((lo - origin) / res).floor().max(0.0);
            let b = ((hi - origin) / res).ceil().min(n as f64);
            (b > a).then(|| (a as usize, b as usize - 1))
        };
        let Some((c0, c1)) = span(rect.xmin, rect.xmax, self.origin.x, self.width) else {
            return;
        };
        let Some((r0, r1)) = span(rect.ymin, rect.ymax, self.origin.y, self.height) else {
            return;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let cell = self.cell_rect(col, row);
                if cell.xmin < rect.xmax
                    && cell.xmax > rect.xmin
                    && cell.ymin < rect.ymax
                    && cell.ymax > rect.ymin
                {
                    self.set(col, row, true);
                }
            }
        }
    }

    // Candidate index range (one cell of slack) for centers within [lo, hi].
    fn center_span(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.resolution - 0.5).floor() - 1.0;
        let b = ((hi - origin) / self.resolution - 0.5).ceil() + 1.0;
        let a = a.max(0.0);
        let b = b.min(n as f64 - 1.0);
        (b >= a).then_some((a as usize, b as usize))
    }

    /// Dilates the occupied set by a disk stencil; see [`inflate`].
    pub fn inflate(&self, radius: f64) -> Result<InflatedGrid> {
        inflate_with(self, radius, false, Exec::default())
    }
}

fn cells_spanning(length: f64, resolution: f64) -> Result<usize> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::invalid("resolution must be positive"));
    }
    let n = (length / resolution - 1e-9).ceil();
    if !(n >= 1.0) || !n.is_finite() || n > 1e8 {
        return Err(Error::invalid("grid size out of range"));
    }
    Ok(n as usize)
}

/// Grid after dilation, remembering the radius it was built with.
#[derive(Clone, Debug, PartialEq)]
pub struct InflatedGrid {
    grid: OccupancyGrid,
    inflation_radius: f64,
}

impl InflatedGrid {
    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn inflation_radius(&self) -> f64 {
        self.inflation_radius
    }

    #[inline]
    pub fn is_occupied(&self, p: Point) -> bool {
        self.grid.is_occupied(p)
    }

    /// True iff any point is occupied. An empty list is rejected.
    pub fn polyline_collides(&self, points: &[Point]) -> Result<bool> {
        if points.is_empty() {
            return Err(Error::invalid("polyline needs at least one point"));
        }
        Ok(points.iter().any(|&p| self.grid.is_occupied(p)))
    }

    pub fn any_occupied<I: IntoIterator<Item = Point>>(&self, points: I) -> bool {
        points.into_iter().any(|p| self.grid.is_occupied(p))
    }
}

/// Stencil radius in cells for a metric radius: `ceil(radius / resolution)`.
pub fn stencil_cells(radius: f64, resolution: f64) -> usize {
    if radius <= 0.0 {
        return 0;
    }
    (radius / resolution - 1e-9).ceil().max(0.0) as usize
}

/// Dilation by the disk stencil `{(i, j) : i^2 + j^2 <= r^2}` with
/// `r = ceil(radius / resolution)`.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> Result<InflatedGrid> {
    inflate_with(grid, radius, false, Exec::default())
}

/// Like [`inflate`], but with everything outside the raster also acting as
/// an obstacle source, so a band of `r` cells along the border is closed.
pub fn inflate_with_border(grid: &OccupancyGrid, radius: f64) -> Result<InflatedGrid> {
    inflate_with(grid, radius, true, Exec::default())
}

pub fn inflate_with(
    grid: &OccupancyGrid,
    radius: f64,
    border: bool,
    exec: Exec,
) -> Result<InflatedGrid> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::invalid("inflation radius must be non-negative"));
    }
    let r = stencil_cells(radius, grid.resolution);
    let (w, h) = (grid.width, grid.height);
    // Half-width of the stencil at each row offset.
    let half: Vec<usize> = (0..=r)
        .map(|j| {
            let rem = r * r - j * j;
            let mut k = (rem as f64).sqrt() as usize;
            while (k + 1) * (k + 1) <= rem {
                k += 1;
            }
            while k * k > rem {
                k -= 1;
            }
            k
        })
        .collect();

    // Distance from each cell to the nearest occupied cell in the same row,
    // scanning both directions.
    let row_dist: Vec<Vec<usize>> = exec.map_range(h, |row| {
        let src = &grid.cells[row * w..(row + 1) * w];
        let far = usize::MAX / 4;
        let mut d = vec![far; w];
        let mut last = if border { Some(-1isize) } else { None };
        for col in 0..w {
            if src[col] {
                last = Some(col as isize);
            }
            if let Some(l) = last {
                d[col] = (col as isize - l) as usize;
            }
        }
        let mut next = if border { Some(w as isize) } else { None };
        for col in (0..w).rev() {
            if src[col] {
                next = Some(col as isize);
            }
            if let Some(n) = next {
                d[col] = d[col].min((n - col as isize) as usize);
            }
        }
        d
    });

    let rows: Vec<Vec<bool>> = exec.map_range(h, |row| {
        let mut out = vec![false; w];
        for (j, &k) in half.iter().enumerate() {
            for src_row in [row as isize - j as isize, row as isize + j as isize] {
                if src_row < 0 || src_row >= h as isize {
                    if border {
                        out.iter_mut().for_each(|c| *c = true);
                    }
                    continue;
                }
                let dist = &row_dist[src_row as usize];
                for (o, &d) in out.iter_mut().zip(dist) {
                    *o |= d <= k;
                }
                if j == 0 {
                    break;
                }
            }
        }
        out
    });

    let mut out = grid.clone();
    out.cells = rows.into_iter().flatten().collect();
    Ok(InflatedGrid {
        grid: out,
        inflation_radius: radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::new(0.1, Point::new(0.0, 0.0), w, h).unwrap()
    }

    #[test]
    fn world_to_cell_examples() {
        let g = grid(20, 20);
        assert_eq!(g.world_to_cell(Point::new(0.05, 0.05)), Some((0, 0)));
        assert_eq!(g.world_to_cell(Point::new(1.0, 0.0)), Some((10, 0)));
        assert_eq!(g.world_to_cell(Point::new(-0.01, 0.0)), None);
        assert_eq!(g.world_to_cell(Point::new(2.0, 0.0)), None);
        let g = OccupancyGrid::new(0.5, Point::new(-5.0, -5.0), 4, 4).unwrap();
        assert_eq!(g.world_to_cell(Point::new(-4.75, -4.75)), Some((0, 0)));
    }

    #[test]
    fn cell_center_examples() {
        let g = grid(20, 20);
        let c = g.cell_center(0, 0).unwrap();
        assert!((c.x - 0.05).abs() < 1e-12 && (c.y - 0.05).abs() < 1e-12);
        let c = g.cell_center(10, 3).unwrap();
        assert!((c.x - 1.05).abs() < 1e-12 && (c.y - 0.35).abs() < 1e-12);
        assert!(g.cell_center(20, 0).is_err());
        assert!(g.cell_center(0, 20).is_err());
    }

    #[test]
    fn is_occupied_examples() {
        let mut g = grid(10, 10);
        assert!(!g.is_occupied(Point::new(0.5, 0.5)));
        assert!(g.is_occupied(Point::new(1.5, 0.5)));
        assert!(g.is_occupied(Point::new(0.5, -0.001)));
        g.set(5, 5, true);
        assert!(g.is_occupied(Point::new(0.55, 0.55)));
    }

    #[test]
    fn inflate_zero_is_identity() {
        let mut g = grid(12, 9);
        g.set(3, 4, true);
        g.set(11, 0, true);
        assert_eq!(g.inflate(0.0).unwrap().grid(), &g);
    }

    #[test]
    fn inflate_single_cell_matches_disk_count() {
        // |{(i, j) : i^2 + j^2 <= 100}| by enumeration.
        let disk = (-10i32..=10)
            .flat_map(|i| (-10i32..=10).map(move |j| (i, j)))
            .filter(|(i, j)| i * i + j * j <= 100)
            .count();
        assert_eq!(disk, 317);
        let mut g = grid(41, 41);
        g.set(20, 20, true);
        let inf = g.inflate(0.9675).unwrap();
        assert_eq!(inf.grid().occupied_count(), disk);
        assert!(inf.grid().get(30, 20) && inf.grid().get(26, 28) && !inf.grid().get(27, 28));
    }

    #[test]
    fn inflate_full_grid_fixpoint() {
        let mut g = grid(7, 5);
        for r in 0..5 {
            for c in 0..7 {
                g.set(c, r, true);
            }
        }
        assert_eq!(g.inflate(0.35).unwrap().grid().occupied_count(), 35);
    }

    #[test]
    fn border_inflation_closes_edges() {
        let g = grid(30, 30);
        let inf = inflate_with_border(&g, 0.3).unwrap();
        assert!(inf.grid().get(2, 15) && !inf.grid().get(3, 15));
        assert!(inf.grid().get(27, 15) && !inf.grid().get(26, 15));
        assert!(inf.grid().get(15, 2) && inf.grid().get(15, 27) && !inf.grid().get(15, 26));
    }

    #[test]
    fn polyline_examples() {
        let mut g = grid(20, 20);
        g.set(10, 10, true);
        let inf = g.inflate(0.2).unwrap();
        let free = [Point::new(0.5, 0.5), Point::new(0.3, 1.7)];
        assert!(!inf.polyline_collides(&free).unwrap());
        let hit = [Point::new(0.5, 0.5), Point::new(1.05, 1.25)];
        assert!(inf.polyline_collides(&hit).unwrap());
        let out = [Point::new(0.5, 0.5), Point::new(2.0, 1.0)];
        assert!(inf.polyline_collides(&out).unwrap());
        assert!(inf.polyline_collides(&[]).is_err());
    }

    #[test]
    fn ascii_rows_are_top_down() {
        let g =
            OccupancyGrid::from_ascii(&["#..", "...", "..#"], 1.0, Point::new(0.0, 0.0)).unwrap();
        assert!(g.get(0, 2) && g.get(2, 0) && g.occupied_count() == 2);
        assert_eq!(g.to_ascii(), vec!["#..", "...", "..#"]);
        assert!(OccupancyGrid::from_ascii(&["#..", ".."], 1.0, Point::default()).is_err());
        assert!(OccupancyGrid::from_ascii(&["#x."], 1.0, Point::default()).is_err());
    }

    #[test]
    fn rect_rasterization() {
        let mut g = grid(30, 30);
        g.mark_rect_centers(&Rect::new(1.0, 1.0, 2.0, 2.0));
        assert_eq!(g.occupied_count(), 100);
        let mut g = grid(30, 30);
        g.mark_rect_overlap(&Rect::new(1.0, 1.0, 2.0, 2.0));
        assert_eq!(g.occupied_count(), 100);
        let mut g = grid(30, 30);
        g.mark_rect_overlap(&Rect::new(1.01, 1.0, 1.02, 2.0));
        assert_eq!(g.occupied_count(), 10);
        let mut g = grid(30, 30);
        g.mark_rect_centers(&Rect::new(1.01, 1.0, 1.02, 2.0));
        assert_eq!(g.occupied_count(), 0);
    }

    fn brute_force(g: &OccupancyGrid, r: usize) -> Vec<bool> {
        let occ: Vec<(usize, usize)> = g.occupied_cells().collect();
        let mut out = vec![false; g.width() * g.height()];
        for row in 0..g.height() {
            for col in 0..g.width() {
                out[row * g.width() + col] = occ.iter().any(|&(c, rr)| {
                    let dx = c as i64 - col as i64;
                    let dy = rr as i64 - row as i64;
                    dx * dx + dy * dy <= (r * r) as i64
                });
            }
        }
        out
    }

    proptest! {
        #[test]
        fn inflate_matches_brute_force(
            cells in proptest::collection::vec((0usize..30, 0usize..30), 0..20),
            radius in 0.0f64..1.0,
        ) {
            let mut g = grid(30, 30);
            for &(c, r) in &cells { g.set(c, r, true); }
            let inf = g.inflate(radius).unwrap();
            let expect = brute_force(&g, stencil_cells(radius, 0.1));
            prop_assert_eq!(&inf.grid().cells, &expect);
        }

        #[test]
        fn inflate_monotone_and_superset(
            cells in proptest::collection::vec((0usize..25, 0usize..25), 0..15),
            a in 0.0f64..0.8,
            b in 0.0f64..0.8,
        ) {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let mut g = grid(25, 25);
            for &(c, r) in &cells { g.set(c, r, true); }
            let ia = g.inflate(a).unwrap();
            let ib = g.inflate(b).unwrap();
            for i in 0..g.cells.len() {
                prop_assert!(!g.cells[i] || ia.grid.cells[i]);
                prop_assert!(!ia.grid.cells[i] || ib.grid.cells[i]);
            }
        }

        #[test]
        fn center_roundtrip(col in 0usize..73, row in 0usize..41, ox in -50.0f64..50.0, oy in -50.0f64..50.0) {
            let g = OccupancyGrid::new(0.1, Point::new(ox, oy), 73, 41).unwrap();
            let c = g.cell_center(col, row).unwrap();
            prop_assert_eq!(g.world_to_cell(c), Some((col, row)));
        }

        #[test]
        fn polyline_is_or_of_points(
            pts in proptest::collection::vec((-0.5f64..3.5, -0.5f64..3.5), 1..12),
        ) {
            let mut g = grid(30, 30);
            g.set(12, 12, true);
            g.set(3, 25, true);
            let inf = g.inflate(0.3).unwrap();
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let expect = pts.iter().any(|&p| inf.is_occupied(p));
            prop_assert_eq!(inf.polyline_collides(&pts).unwrap(), expect);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn sequential_and_parallel_agree() {
        let mut g = grid(64, 48);
        for (c, r) in [(3, 4), (40, 40), (63, 0), (20, 20)] {
            g.set(c, r, true);
        }
        let a = inflate_with(&g, 0.75, true, Exec::Sequential).unwrap();
        let b = inflate_with(&g, 0.75, true, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
