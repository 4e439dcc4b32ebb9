//! Minimal deterministic SVG rendering for funnel plots and dendrograms.
//! No timestamps or randomness: identical inputs yield identical bytes.

use std::fmt::Write as _;

use crate::profiling::{Dendrogram, FunnelGeometry};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

/// Render funnel geometry: points, dashed control curves, and a zero line.
pub fn funnel_svg(geometry: &FunnelGeometry, title: &str) -> String {
    let mut xs: Vec<f64> = geometry.points.iter().map(|p| p.precision).collect();
    let mut ys: Vec<f64> = geometry.points.iter().map(|p| p.estimate).collect();
    for c in &geometry.curves {
        for &(x, hi, lo) in &c.samples {
            xs.push(x);
            ys.push(hi.clamp(-1.0, 1.0));
            ys.push(lo.clamp(-1.0, 1.0));
        }
    }
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let x_max = xs.iter().cloned().fold(0.0f64, f64::max).max(1.0);
    let y_abs = ys.iter().fold(0.05f64, |acc, v| acc.max(v.abs())) * 1.1;

    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y + y_abs) / (2.0 * y_abs) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        fmt(MARGIN),
        title
    );
    // Axes and zero line.
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt(MARGIN),
        fmt(HEIGHT - MARGIN),
        fmt(WIDTH - MARGIN),
        fmt(HEIGHT - MARGIN)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        fmt(MARGIN),
        fmt(MARGIN),
        fmt(MARGIN),
        fmt(HEIGHT - MARGIN)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-width=\"0.5\"/>",
        fmt(sx(x_min)),
        fmt(sy(0.0)),
        fmt(sx(x_max)),
        fmt(sy(0.0))
    );
    // Control curves.
    for curve in &geometry.curves {
        for upper in [true, false] {
            let mut path = String::new();
            let mut started = false;
            for &(x, hi, lo) in &curve.samples {
                let y = if upper { hi } else { lo };
                if y.abs() > y_abs {
                    continue;
                }
                let cmd = if started { 'L' } else { 'M' };
                let _ = write!(path, "{}{} {} ", cmd, fmt(sx(x)), fmt(sy(y)));
                started = true;
            }
            if started {
                let _ = writeln!(
                    svg,
                    "<path d=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-dasharray=\"5,4\" stroke-width=\"1\"/>",
                    path.trim_end()
                );
            }
        }
    }
    // Points, colored by the strongest exceeded control level.
    for p in &geometry.points {
        let color = match p.flags.len() {
            0 => "black",
            1 => "orange",
            2 => "orangered",
            _ => "red",
        };
        let _ = writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"{}\"><title>{}</title></circle>",
            fmt(sx(p.precision)),
            fmt(sy(p.estimate)),
            color,
            p.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render a rectangular dendrogram: leaves along the bottom, merge height
/// on the vertical axis.
pub fn dendrogram_svg(tree: &Dendrogram, title: &str) -> String {
    let m = tree.leaves.len();
    let max_height = tree
        .merges
        .last()
        .map(|merge| merge.height)
        .unwrap_or(1.0)
        .max(1e-12);

    // Leaf order: in-order traversal of the final tree.
    let root = m + tree.merges.len() - 1;
    let mut order = Vec::with_capacity(m);
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if id < m {
            order.push(id);
        } else {
            let merge = &tree.merges[id - m];
            stack.push(merge.right);
            stack.push(merge.left);
        }
    }
    let mut leaf_pos = vec![0.0; m];
    for (slot, &leaf) in order.iter().enumerate() {
        leaf_pos[leaf] = slot as f64;
    }

    let sx = |slot: f64| MARGIN + slot / ((m - 1).max(1)) as f64 * (WIDTH - 2.0 * MARGIN);
    let sy = |h: f64| HEIGHT - MARGIN - h / max_height * (HEIGHT - 2.0 * MARGIN - 20.0);

    // Horizontal position and height of every cluster id.
    let mut xs = vec![0.0; m + tree.merges.len()];
    let mut hs = vec![0.0; m + tree.merges.len()];
    for leaf in 0..m {
        xs[leaf] = leaf_pos[leaf];
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        fmt(MARGIN),
        title
    );
    for (t, merge) in tree.merges.iter().enumerate() {
        let (xl, xr) = (xs[merge.left], xs[merge.right]);
        let (hl, hr) = (hs[merge.left], hs[merge.right]);
        let y = sy(merge.height);
        // Two risers and the connecting bar.
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            fmt(sx(xl)),
            fmt(sy(hl)),
            fmt(sx(xl)),
            fmt(y)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            fmt(sx(xr)),
            fmt(sy(hr)),
            fmt(sx(xr)),
            fmt(y)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            fmt(sx(xl)),
            fmt(y),
            fmt(sx(xr)),
            fmt(y)
        );
        xs[m + t] = 0.5 * (xl + xr);
        hs[m + t] = merge.height;
    }
    for leaf in 0..m {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" transform=\"rotate(45 {} {})\">{}</text>",
            fmt(sx(leaf_pos[leaf])),
            fmt(HEIGHT - MARGIN + 14.0),
            fmt(sx(leaf_pos[leaf])),
            fmt(HEIGHT - MARGIN + 14.0),
            tree.leaves[leaf]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiling::{funnel_geometry, hierarchical_cluster, DistanceMatrix, Linkage};

    #[test]
    fn svg_outputs_are_deterministic() {
        let pts = vec![
            ("a".to_string(), 0.1, 0.05),
            ("b".to_string(), -0.02, 0.2),
        ];
        let g = funnel_geometry(&pts, &[0.975, 0.99, 0.999]).unwrap();
        assert_eq!(funnel_svg(&g, "t"), funnel_svg(&g, "t"));

        let d = DistanceMatrix::from_values(
            3,
            vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0],
        )
        .unwrap();
        let tree = hierarchical_cluster(
            &d,
            &["x".into(), "y".into(), "z".into()],
            Linkage::Complete,
        )
        .unwrap();
        let svg = dendrogram_svg(&tree, "players");
        assert_eq!(svg, dendrogram_svg(&tree, "players"));
        assert!(svg.contains("<svg"));
        assert!(!svg.to_lowercase().contains("timestamp"));
    }
}
