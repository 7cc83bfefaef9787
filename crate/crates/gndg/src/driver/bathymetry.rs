//! Built-in bed elevation profiles for the benchmark scenarios, plus gridded
//! bathymetry files with bilinear interpolation.

use crate::error::Error;

#[derive(Debug, Clone)]
pub enum BathySpec {
    /// b = level everywhere.
    Flat { level: f64 },
    /// Gaussian bump and hollow of equal dimensions.
    BumpHollow {
        base: f64,
        d: f64,
        l: f64,
        x1: (f64, f64),
        x2: (f64, f64),
    },
    /// Plane beach: b = max(0, h0 - slope (x - shore_x)); the still shoreline
    /// sits at shore_x, water deepens toward +x.
    Slope { h0: f64, slope: f64, shore_x: f64 },
    /// Trapezoidal submerged bar (piecewise linear in x).
    TrapezoidBar {
        front_toe: f64,
        crest_start: f64,
        crest_end: f64,
        back_end: f64,
        height: f64,
    },
    /// Plane slope deformed by an elliptic shoal, rotated by `angle_deg`
    /// about the origin.
    EllipticShoal { angle_deg: f64 },
    /// Gridded samples with bilinear interpolation.
    Grid(GridBathymetry),
}

impl BathySpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            BathySpec::Flat { level } => *level,
            BathySpec::BumpHollow { base, d, l, x1, x2 } => {
                let r1 = ((x - x1.0).powi(2) + (y - x1.1).powi(2)).sqrt();
                let r2 = ((x - x2.0).powi(2) + (y - x2.1).powi(2)).sqrt();
                base + d * (-(r1 / l).powi(2)).exp() - d * (-(r2 / l).powi(2)).exp()
            }
            BathySpec::Slope { h0, slope, shore_x } => (h0 - slope * (x - shore_x)).max(0.0),
            BathySpec::TrapezoidBar {
                front_toe,
                crest_start,
                crest_end,
                back_end,
                height,
            } => {
                if x <= *front_toe || x >= *back_end {
                    0.0
                } else if x < *crest_start {
                    height * (x - front_toe) / (crest_start - front_toe)
                } else if x <= *crest_end {
                    *height
                } else {
                    height * (back_end - x) / (back_end - crest_end)
                }
            }
            BathySpec::EllipticShoal { angle_deg } => {
                let a = angle_deg.to_radians();
                let xr = x * a.cos() - y * a.sin();
                let yr = x * a.sin() + y * a.cos();
                let zb = if xr >= -5.82 { (5.82 + xr) / 50.0 } else { 0.0 };
                let inside = (xr / 4.0).powi(2) + (yr / 3.0).powi(2) <= 1.0;
                let zs = if inside {
                    let t = 1.0 - (xr / 3.75).powi(2) - (yr / 5.0).powi(2);
                    -0.3 + 0.5 * t.max(0.0).sqrt()
                } else {
                    0.0
                };
                zb + zs
            }
            BathySpec::Grid(g) => g.eval(x, y),
        }
    }
}

/// Regular grid of bed elevations: header `nx ny x0 y0 dx dy` followed by
/// nx*ny values, row-major from y0.
#[derive(Debug, Clone)]
pub struct GridBathymetry {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub values: Vec<f64>,
}

impl GridBathymetry {
    pub fn load(path: &std::path::Path) -> Result<GridBathymetry, Error> {
        let text = std::fs::read_to_string(path)?;
        let mut nums = text
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}' in {}", path.display()))));
        let mut next = |name: &str| -> Result<f64, Error> {
            nums.next()
                .ok_or_else(|| Error::Config(format!("grid file truncated at {name}")))?
        };
        let nx = next("nx")? as usize;
        let ny = next("ny")? as usize;
        let x0 = next("x0")?;
        let y0 = next("y0")?;
        let dx = next("dx")?;
        let dy = next("dy")?;
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx * ny {
            values.push(next(&format!("value {i}"))?);
        }
        if !(nx >= 2 && ny >= 2 && dx > 0.0 && dy > 0.0) {
            return Err(Error::Config("grid bathymetry needs nx,ny >= 2 and positive spacing".into()));
        }
        Ok(GridBathymetry {
            nx,
            ny,
            x0,
            y0,
            dx,
            dy,
            values,
        })
    }

    /// Bilinear interpolation, clamped to the grid extent.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.x0) / self.dx).clamp(0.0, (self.nx - 1) as f64 - 1e-12);
        let fy = ((y - self.y0) / self.dy).clamp(0.0, (self.ny - 1) as f64 - 1e-12);
        let i = fx.floor() as usize;
        let j = fy.floor() as usize;
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v = |ii: usize, jj: usize| self.values[jj * self.nx + ii];
        v(i, j) * (1.0 - tx) * (1.0 - ty)
            + v(i + 1, j) * tx * (1.0 - ty)
            + v(i, j + 1) * (1.0 - tx) * ty
            + v(i + 1, j + 1) * tx * ty
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_profile() {
        let bar = BathySpec::TrapezoidBar {
            front_toe: 6.0,
            crest_start: 12.0,
            crest_end: 14.0,
            back_end: 17.0,
            height: 0.3,
        };
        assert_eq!(bar.eval(2.0, 0.0), 0.0);
        assert!((bar.eval(9.0, 0.0) - 0.15).abs() < 1e-14); // halfway up 1/20
        assert_eq!(bar.eval(13.0, 0.0), 0.3);
        assert!((bar.eval(15.5, 0.0) - 0.15).abs() < 1e-14); // halfway down 1/10
        assert_eq!(bar.eval(20.0, 0.0), 0.0);
    }

    #[test]
    fn slope_profile() {
        // h0 = 1, slope 1/19.85, shoreline at x = 0: depth h0 - b
        let s = BathySpec::Slope {
            h0: 1.0,
            slope: 1.0 / 19.85,
            shore_x: 0.0,
        };
        assert!((s.eval(0.0, 0.0) - 1.0).abs() < 1e-14);
        assert!((s.eval(19.85, 0.0) - 0.0).abs() < 1e-14);
        assert_eq!(s.eval(30.0, 0.0), 0.0);
        assert!(s.eval(-5.0, 0.0) > 1.0); // dry land keeps rising
    }

    #[test]
    fn shoal_matches_closed_form_at_center() {
        let s = BathySpec::EllipticShoal { angle_deg: 20.0 };
        // at the origin (rotated coords both zero): zb = 5.82/50, zs = 0.2
        let b = s.eval(0.0, 0.0);
        assert!((b - (5.82 / 50.0 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn grid_bilinear() {
        let g = GridBathymetry {
            nx: 3,
            ny: 2,
            x0: 0.0,
            y0: 0.0,
            dx: 1.0,
            dy: 1.0,
            values: vec![0.0, 1.0, 2.0, 1.0, 2.0, 3.0],
        };
        assert!((g.eval(0.5, 0.0) - 0.5).abs() < 1e-14);
        assert!((g.eval(0.0, 0.5) - 0.5).abs() < 1e-14);
        assert!((g.eval(1.5, 0.5) - 2.0).abs() < 1e-14);
        // clamped outside
        assert!((g.eval(-3.0, -3.0) - 0.0).abs() < 1e-14);
    }
}
