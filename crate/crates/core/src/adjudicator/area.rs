use crate::domain::{AreaLayout, Point};
use crate::exec::Execution;

/// Result of locating a position on the playfield.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub area_id: String,
    /// The input lay outside the playfield and was clamped to its edge.
    pub clamped: bool,
    pub position: Point,
}

/// The area containing `pos`. Points on a shared edge go to the
/// lexicographically smallest area id; out-of-bounds points are clamped.
pub fn classify_area(pos: Point, layout: &AreaLayout) -> Classification {
    let clamped_pos = layout.bounds.clamp(pos);
    let area_id = layout
        .areas
        .iter()
        .filter(|a| a.rect.contains(clamped_pos))
        .map(|a| a.id.as_str())
        .min()
        .unwrap_or_default()
        .to_string();
    Classification {
        area_id,
        clamped: clamped_pos != pos,
        position: clamped_pos,
    }
}

/// Grid index over a layout for repeated lookups. The playfield is cut on
/// every area edge; each cell maps to the area covering it.
#[derive(Debug, Clone)]
pub struct AreaIndex {
    layout: AreaLayout,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Area index per cell, row-major over (y, x); `None` for gaps.
    cells: Vec<Option<usize>>,
}

impl AreaIndex {
    pub fn new(layout: &AreaLayout) -> Self {
        let b = layout.bounds;
        let xs = edges(b.x0, b.x1, layout.areas.iter().flat_map(|a| [a.rect.x0, a.rect.x1]));
        let ys = edges(b.y0, b.y1, layout.areas.iter().flat_map(|a| [a.rect.y0, a.rect.y1]));
        let mut cells = Vec::with_capacity((xs.len() - 1) * (ys.len() - 1));
        for yw in ys.windows(2) {
            for xw in xs.windows(2) {
                let c = Point::new((xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0);
                let best = layout
                    .areas
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.rect.contains(c))
                    .min_by(|(_, a), (_, b)| a.id.cmp(&b.id))
                    .map(|(i, _)| i);
                cells.push(best);
            }
        }
        Self {
            layout: layout.clone(),
            xs,
            ys,
            cells,
        }
    }

    pub fn layout(&self) -> &AreaLayout {
        &self.layout
    }

    pub fn classify(&self, pos: Point) -> Classification {
        let p = self.layout.bounds.clamp(pos);
        let cols = self.xs.len() - 1;
        let mut best: Option<&str> = None;
        for row in spans(&self.ys, p.y) {
            for col in spans(&self.xs, p.x) {
                if let Some(i) = self.cells[row * cols + col] {
                    let id = self.layout.areas[i].id.as_str();
                    if best.is_none_or(|b| id < b) {
                        best = Some(id);
                    }
                }
            }
        }
        Classification {
            area_id: best.unwrap_or_default().to_string(),
            clamped: p != pos,
            position: p,
        }
    }

    pub fn is_safe(&self, pos: Point) -> bool {
        self.layout.is_safe(&self.classify(pos).area_id)
    }

    pub fn classify_all(&self, points: &[Point], exec: Execution) -> Vec<Classification> {
        exec.map(points, |p| self.classify(*p))
    }
}

fn edges(lo: f64, hi: f64, it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = it
        .chain([lo, hi])
        .filter(|e| e.is_finite() && *e >= lo && *e <= hi)
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Indices of the grid spans whose closed interval contains `v` (one, or two
/// when `v` sits on an interior edge).
fn spans(edges: &[f64], v: f64) -> impl Iterator<Item = usize> {
    let n = edges.len() - 1;
    let i = edges.partition_point(|e| *e <= v).saturating_sub(1).min(n - 1);
    let below = (i > 0 && edges[i] == v).then(|| i - 1);
    std::iter::once(i).chain(below)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Area, Rect, ScenarioConfig};

    fn layout() -> AreaLayout {
        ScenarioConfig::bundled().layout
    }

    #[test]
    fn interior_point() {
        let l = layout();
        let c = classify_area(Point::new(7.0, 1.0), &l);
        assert_eq!(c.area_id, "safe_a");
        assert!(!c.clamped);
        assert_eq!(AreaIndex::new(&l).classify(Point::new(7.0, 1.0)).area_id, "safe_a");
    }

    #[test]
    fn shared_edge_goes_to_smallest_id() {
        let l = layout();
        // crosswalk_west / road_west share x = 3
        let p = Point::new(3.0, 4.0);
        assert_eq!(classify_area(p, &l).area_id, "crosswalk_west");
        assert_eq!(AreaIndex::new(&l).classify(p).area_id, "crosswalk_west");
        // corner shared by road_west, crosswalk_west and safe_a
        let corner = Point::new(3.0, 2.0);
        assert_eq!(AreaIndex::new(&l).classify(corner).area_id, "crosswalk_west");
    }

    #[test]
    fn clamps_out_of_bounds() {
        let l = layout();
        let c = AreaIndex::new(&l).classify(Point::new(-3.0, 9.0));
        assert!(c.clamped);
        assert_eq!(c.position, Point::new(0.0, 8.0));
        assert_eq!(c.area_id, "safe_b");
    }

    #[test]
    fn custom_layout_edges() {
        let l = AreaLayout {
            bounds: Rect::new(0.0, 0.0, 2.0, 1.0),
            participant_start: Point::new(0.5, 0.5),
            areas: vec![
                Area {
                    id: "b".into(),
                    rect: Rect::new(0.0, 0.0, 1.0, 1.0),
                    description: String::new(),
                    is_safe: true,
                },
                Area {
                    id: "a".into(),
                    rect: Rect::new(1.0, 0.0, 2.0, 1.0),
                    description: String::new(),
                    is_safe: true,
                },
            ],
        };
        let idx = AreaIndex::new(&l);
        assert_eq!(idx.classify(Point::new(1.0, 0.5)).area_id, "a");
        assert_eq!(idx.classify(Point::new(0.999, 0.5)).area_id, "b");
        assert_eq!(idx.classify(Point::new(2.0, 1.0)).area_id, "a");
    }
}
