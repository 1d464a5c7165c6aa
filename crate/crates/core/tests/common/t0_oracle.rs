use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use pat_core::phantoms::{speed_value, SpeedField};
use pat_core::scalar::Point2;

/// Dijkstra on the 8-connected grid with edge weight length / harmonic mean speed.
pub fn dijkstra_t0(f: &SpeedField, spacing: f64) -> f64 {
    let half = (1.0 / spacing).ceil() as i64 + 1;
    let c = |i: i64, j: i64| speed_value::<f64>(f, Point2::new(i as f64 * spacing, j as f64 * spacing));
    let inside = |i: i64, j: i64| ((i * i + j * j) as f64) * spacing * spacing < 1.0;
    let key = |d: f64| (d * 1e12) as u64;
    let mut dist: HashMap<(i64, i64), f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    for i in -half..=half {
        for j in -half..=half {
            if !inside(i, j) {
                continue;
            }
            let boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(a, b)| !inside(i + a, j + b));
            if boundary {
                let r = ((i * i + j * j) as f64).sqrt() * spacing;
                let d = (1.0 - r) / c(i, j);
                dist.insert((i, j), d);
                heap.push(Reverse((key(d), i, j)));
            }
        }
    }
    let mut best = 0.0f64;
    while let Some(Reverse((k, i, j))) = heap.pop() {
        let d = dist[&(i, j)];
        if k != key(d) {
            continue;
        }
        best = best.max(d);
        for a in -1..=1 {
            for b in -1..=1 {
                if (a, b) == (0, 0) || !inside(i + a, j + b) {
                    continue;
                }
                let len = ((a * a + b * b) as f64).sqrt() * spacing;
                let (c1, c2) = (c(i, j), c(i + a, j + b));
                let w = len * (1.0 / c1 + 1.0 / c2) / 2.0;
                let nd = d + w;
                let e = dist.entry((i + a, j + b)).or_insert(f64::INFINITY);
                if nd < *e {
                    *e = nd;
                    heap.push(Reverse((key(nd), i + a, j + b)));
                }
            }
        }
    }
    best
}
