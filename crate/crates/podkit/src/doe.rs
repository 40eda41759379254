//! Quasi-Monte Carlo designs of experiments: Sobol' low-discrepancy
//! sequences mapped through the input distributions.

use crate::data::{Family, InputSet, SimulationDataset};
use crate::error::{Error, Result};
use crate::math::special::norm_ppf;

/// Largest supported Sobol' dimension.
pub const MAX_DIM: usize = 12;

/// Joe-Kuo direction-number parameters `(a, m)` for dimensions 2..=12;
/// dimension 1 is the van der Corput sequence in base 2.
const DIRECTIONS: [(u32, &[u32]); 11] = [
    (0, &[1]),              // d = 2
    (1, &[1, 3]),           // d = 3
    (1, &[1, 3, 1]),        // d = 4
    (2, &[1, 1, 1]),        // d = 5
    (1, &[1, 1, 3, 3]),     // d = 6
    (4, &[1, 3, 5, 13]),    // d = 7
    (2, &[1, 1, 5, 5, 17]), // d = 8
    (4, &[1, 1, 5, 5, 5]),  // d = 9
    (7, &[1, 1, 7, 11, 19]),// d = 10
    (11, &[1, 1, 5, 1, 1]), // d = 11
    (13, &[1, 1, 1, 3, 11]),// d = 12
];

const BITS: usize = 32;

/// Direction numbers for one coordinate, as 32-bit fixed-point values.
fn direction_numbers(dim_index: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1u32 << (31 - k);
        }
        return v;
    }
    let (a, m) = DIRECTIONS[dim_index - 1];
    let s = m.len();
    for (k, &mk) in m.iter().enumerate() {
        v[k] = mk << (31 - k);
    }
    for k in s..BITS {
        let mut value = v[k - s] ^ (v[k - s] >> s);
        for bit in 0..(s - 1) {
            if (a >> bit) & 1 == 1 {
                value ^= v[k - s + 1 + bit];
            }
        }
        v[k] = value;
    }
    v
}

/// Points of a low-discrepancy design in the unit hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitHypercubeDesign {
    pub dim: usize,
    /// `n` rows of `dim` coordinates, each in [0, 1).
    pub points: Vec<Vec<f64>>,
}

impl UnitHypercubeDesign {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// First `n` points of the `dim`-dimensional Sobol' sequence.
///
/// Points are produced in Gray-code order starting at index 1; the all-zeros
/// index-0 point is skipped so that inverse-CDF mapping stays finite.
pub fn sobol_sequence(dim: usize, n: usize) -> Result<UnitHypercubeDesign> {
    if dim < 1 {
        return Err(Error::InvalidArgument("sobol dimension must be >= 1".into()));
    }
    if dim > MAX_DIM {
        return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
    }
    let directions: Vec<[u32; BITS]> = (0..dim).map(direction_numbers).collect();
    let scale = 1.0 / (1u64 << BITS) as f64;

    let mut state = vec![0u32; dim];
    let mut points = Vec::with_capacity(n);
    for index in 1..=n as u64 {
        let bit = index.trailing_zeros() as usize;
        for (coord, dirs) in state.iter_mut().zip(&directions) {
            *coord ^= dirs[bit];
        }
        points.push(state.iter().map(|&x| x as f64 * scale).collect());
    }
    Ok(UnitHypercubeDesign { dim, points })
}

/// Maps a Sobol' design through the input distributions.
///
/// Each column is the inverse-CDF image of its Sobol' coordinate;
/// conditional-uniform columns use the realized interval
/// `[-x_src + lo_offset, hi]` row by row. When the set contains second-flaw
/// inputs, rows alternate deterministically between one and two flaws (even
/// design indices get one flaw) and the second-flaw cells of one-flaw rows
/// are left absent.
pub fn sample_inputs(specs: &InputSet, n: usize) -> Result<SimulationDataset> {
    let dim = specs.len();
    let design = sobol_sequence(dim, n)?;
    let has_second_flaw = specs.specs().iter().any(|s| s.second_flaw);

    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(n);
    let mut flaw_count: Vec<u8> = Vec::with_capacity(n);
    for (row_idx, point) in design.points.iter().enumerate() {
        let flaws = if has_second_flaw && row_idx % 2 == 1 { 2 } else { 1 };
        let mut row: Vec<Option<f64>> = Vec::with_capacity(dim);
        for (j, spec) in specs.specs().iter().enumerate() {
            if spec.second_flaw && flaws == 1 {
                row.push(None);
                continue;
            }
            let u = point[j];
            let value = match &spec.family {
                Family::Gaussian { mean, sd } => mean + sd * norm_ppf(u),
                Family::Uniform { lo, hi } => lo + u * (hi - lo),
                Family::ConditionalUniform { source, lo_offset, hi } => {
                    let src_idx = specs.index_of(source).expect("validated source");
                    let src = row[src_idx].ok_or_else(|| {
                        Error::Spec(format!(
                            "row {row_idx}: source `{source}` absent for conditional input `{}`",
                            spec.name
                        ))
                    })?;
                    let lo = -src + lo_offset;
                    if !(lo < *hi) {
                        return Err(Error::Spec(format!(
                            "row {row_idx}: realized interval [{lo}, {hi}] for `{}` is empty",
                            spec.name
                        )));
                    }
                    lo + u * (hi - lo)
                }
            };
            row.push(Some(value));
        }
        rows.push(row);
        flaw_count.push(flaws as u8);
    }

    SimulationDataset::new(
        specs.names(),
        rows,
        None,
        None,
        has_second_flaw.then_some(flaw_count),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{InputSpec, Role};
    use crate::math::rng::rng_for;
    use rand::Rng;

    #[test]
    fn one_dimensional_prefix_matches_reference() {
        let design = sobol_sequence(1, 3).unwrap();
        let xs: Vec<f64> = design.points.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.5, 0.75, 0.25]);
    }

    #[test]
    fn first_two_dimensional_point_is_center() {
        let design = sobol_sequence(2, 1).unwrap();
        assert_eq!(design.points[0], vec![0.5, 0.5]);
    }

    #[test]
    fn zero_points_is_empty() {
        let design = sobol_sequence(3, 0).unwrap();
        assert!(design.is_empty());
    }

    #[test]
    fn unsupported_dimension_errors() {
        assert!(matches!(
            sobol_sequence(MAX_DIM + 1, 4),
            Err(Error::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn determinism_bit_identical() {
        let a = sobol_sequence(5, 64).unwrap();
        let b = sobol_sequence(5, 64).unwrap();
        assert_eq!(a, b);
    }

    fn star_discrepancy_1d(xs: &[f64]) -> f64 {
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let n = sorted.len() as f64;
        let mut d: f64 = 0.0;
        for (i, x) in sorted.iter().enumerate() {
            let up = ((i + 1) as f64 / n - x).abs();
            let down = (x - i as f64 / n).abs();
            d = d.max(up).max(down);
        }
        d
    }

    #[test]
    fn discrepancy_beats_random_designs() {
        let mut rng = rng_for(20240811, 0);
        for k in 4..=8u32 {
            let n = 1usize << k;
            let design = sobol_sequence(1, n).unwrap();
            let xs: Vec<f64> = design.points.iter().map(|p| p[0]).collect();
            let sobol_d = star_discrepancy_1d(&xs);
            let mut random_mean = 0.0;
            for _ in 0..100 {
                let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                random_mean += star_discrepancy_1d(&ys) / 100.0;
            }
            assert!(
                sobol_d < random_mean,
                "n = {n}: sobol {sobol_d} vs random mean {random_mean}"
            );
        }
    }

    #[test]
    fn inverse_cdf_midpoints() {
        let specs = InputSet::new(vec![
            InputSpec {
                name: "g".into(),
                family: Family::Gaussian { mean: 0.0, sd: 1.0 },
                role: Role::Nuisance,
                second_flaw: false,
            },
            InputSpec {
                name: "u".into(),
                family: Family::Uniform { lo: 2.0, hi: 4.0 },
                role: Role::Nuisance,
                second_flaw: false,
            },
        ])
        .unwrap();
        // first Sobol point is (0.5, 0.5)
        let ds = sample_inputs(&specs, 3).unwrap();
        assert!(ds.rows()[0][0].unwrap().abs() < 1e-12);
        assert!((ds.rows()[0][1].unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_interval_midpoint() {
        let specs = InputSet::new(vec![
            InputSpec {
                name: "P1".into(),
                family: Family::Uniform { lo: 0.5, hi: 0.6 },
                role: Role::DefectSize,
                second_flaw: false,
            },
            InputSpec {
                name: "ebav1".into(),
                family: Family::ConditionalUniform {
                    source: "P1".into(),
                    lo_offset: 0.0,
                    hi: 1.0,
                },
                role: Role::Nuisance,
                second_flaw: false,
            },
        ])
        .unwrap();
        // first point (0.5, 0.5): P1 = 0.55 -> interval [-0.55, 1], mid 0.225
        let ds = sample_inputs(&specs, 3).unwrap();
        let p1 = ds.rows()[0][0].unwrap();
        let e1 = ds.rows()[0][1].unwrap();
        assert!((p1 - 0.55).abs() < 1e-12);
        assert!((e1 - 0.225).abs() < 1e-12);
    }

    #[test]
    fn flaw_split_alternates_and_blanks_second_flaw_columns() {
        let specs = InputSet::new(vec![
            InputSpec {
                name: "P1".into(),
                family: Family::Uniform { lo: 0.1, hi: 0.5 },
                role: Role::DefectSize,
                second_flaw: false,
            },
            InputSpec {
                name: "P2".into(),
                family: Family::Uniform { lo: 0.1, hi: 0.5 },
                role: Role::DefectSize,
                second_flaw: true,
            },
        ])
        .unwrap();
        let ds = sample_inputs(&specs, 6).unwrap();
        let fc = ds.flaw_count().unwrap();
        assert_eq!(fc, &[1, 2, 1, 2, 1, 2]);
        for (i, row) in ds.rows().iter().enumerate() {
            assert!(row[0].is_some());
            assert_eq!(row[1].is_some(), fc[i] == 2);
        }
    }

    #[test]
    fn marginals_match_spec_cdfs() {
        // Kolmogorov distance of each unconditioned column at n = 4096
        let specs = InputSet::new(vec![
            InputSpec {
                name: "E".into(),
                family: Family::Gaussian { mean: 1.27, sd: 0.04 },
                role: Role::Nuisance,
                second_flaw: false,
            },
            InputSpec {
                name: "h1".into(),
                family: Family::Uniform { lo: 5.0, hi: 10.0 },
                role: Role::Nuisance,
                second_flaw: false,
            },
        ])
        .unwrap();
        let ds = sample_inputs(&specs, 4096).unwrap();
        let cdfs: [Box<dyn Fn(f64) -> f64>; 2] = [
            Box::new(|x: f64| crate::math::special::norm_cdf((x - 1.27) / 0.04)),
            Box::new(|x: f64| ((x - 5.0) / 5.0).clamp(0.0, 1.0)),
        ];
        for (col, cdf) in cdfs.iter().enumerate() {
            let mut xs: Vec<f64> = ds.rows().iter().map(|r| r[col].unwrap()).collect();
            xs.sort_by(|a, b| a.total_cmp(b));
            let n = xs.len() as f64;
            let mut dist: f64 = 0.0;
            for (i, x) in xs.iter().enumerate() {
                let f = cdf(*x);
                dist = dist.max((f - i as f64 / n).abs());
                dist = dist.max(((i + 1) as f64 / n - f).abs());
            }
            assert!(dist < 0.05, "column {col}: Kolmogorov distance {dist}");
        }
    }
}
