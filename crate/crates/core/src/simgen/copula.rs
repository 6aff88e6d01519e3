use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::marginal::{std_normal_cdf, Marginal};
use super::outlier::{inject_outlier, OutlierInjection};
use crate::error::{Error, Result};
use crate::stats::NumericColumn;
use crate::table::DataTable;

/// A validated correlation matrix with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Checks symmetry, unit diagonal and positive definiteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidCorrelation(format!(
                "matrix must be square and nonempty, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        for i in 0..n {
            if matrix[(i, i)] != 1.0 {
                return Err(Error::InvalidCorrelation(format!("diagonal entry {i} is {}", matrix[(i, i)])));
            }
            for j in 0..i {
                let v = matrix[(i, j)];
                if v != matrix[(j, i)] {
                    return Err(Error::InvalidCorrelation(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
                if !(v > -1.0 && v < 1.0) {
                    return Err(Error::InvalidCorrelation(format!("entry ({i},{j}) = {v} outside (-1, 1)")));
                }
            }
        }
        let chol = Cholesky::<f64, Dyn>::new(matrix.clone())
            .ok_or_else(|| Error::InvalidCorrelation("matrix is not positive definite".into()))?;
        Ok(Self {
            lower: chol.l(),
            matrix,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is a correlation matrix")
    }

    /// Builds a matrix from its strictly-lower entries listed row by row,
    /// e.g. `[r10, r20, r21]` for three variables.
    pub fn from_lower(n: usize, lower: &[f64]) -> Result<Self> {
        if lower.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidCorrelation(format!(
                "{n} variables need {} off-diagonal entries, got {}",
                n * (n - 1) / 2,
                lower.len()
            )));
        }
        let mut m = DMatrix::identity(n, n);
        let mut it = lower.iter();
        for i in 1..n {
            for j in 0..i {
                let v = *it.next().expect("length checked");
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.lower
    }
}

impl Serialize for CorrelationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrelationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("correlation matrix must be square"));
        }
        let m = DMatrix::from_row_iterator(n, n, rows.into_iter().flatten());
        Self::new(m).map_err(serde::de::Error::custom)
    }
}

/// Candidate values for one off-diagonal pair of a correlation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairValues {
    pub a: String,
    pub b: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGrid {
    pub matrices: Vec<CorrelationMatrix>,
    /// Combinations dropped because they were not positive definite.
    pub rejected: usize,
}

/// Cartesian product of the listed pair values over `names`; pairs not
/// listed are uncorrelated. Non positive-definite combinations are dropped.
pub fn correlation_grid(names: &[&str], pairs: &[PairValues]) -> Result<CorrelationGrid> {
    let n = names.len();
    let index = |name: &str| {
        names
            .iter()
            .position(|v| *v == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let mut resolved = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (i, j) = (index(&p.a)?, index(&p.b)?);
        if i == j {
            return Err(Error::InvalidCorrelation(format!("pair {}-{} is a diagonal entry", p.a, p.b)));
        }
        if resolved.iter().any(|&(a, b, _): &(usize, usize, &[f64])| (a, b) == (i, j) || (a, b) == (j, i)) {
            return Err(Error::InvalidCorrelation(format!("pair {}-{} listed twice", p.a, p.b)));
        }
        if p.values.is_empty() {
            return Err(Error::InvalidCorrelation(format!("pair {}-{} has no values", p.a, p.b)));
        }
        if let Some(v) = p.values.iter().find(|v| !(**v > -1.0 && **v < 1.0)) {
            return Err(Error::InvalidCorrelation(format!("pair {}-{} value {v} outside (-1, 1)", p.a, p.b)));
        }
        resolved.push((i, j, p.values.as_slice()));
    }

    let mut matrices = Vec::new();
    let mut rejected = 0;
    let mut choice = vec![0usize; resolved.len()];
    loop {
        let mut m = DMatrix::identity(n, n);
        for (&(i, j, vals), &c) in resolved.iter().zip(&choice) {
            m[(i, j)] = vals[c];
            m[(j, i)] = vals[c];
        }
        match CorrelationMatrix::new(m) {
            Ok(cm) => matrices.push(cm),
            Err(_) => rejected += 1,
        }
        // odometer over the pair choices, first pair slowest
        let mut k = resolved.len();
        loop {
            if k == 0 {
                if matrices.is_empty() {
                    return Err(Error::EmptyGrid { rejected });
                }
                return Ok(CorrelationGrid { matrices, rejected });
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < resolved[k].2.len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaVariable {
    pub name: String,
    pub marginal: Marginal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier: Option<OutlierInjection>,
}

/// Gaussian copula scenario. Each replicate draws one matrix uniformly
/// from `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaScenario {
    pub n_obs: usize,
    pub variables: Vec<CopulaVariable>,
    pub grid: Vec<CorrelationMatrix>,
}

impl CopulaScenario {
    pub fn new(n_obs: usize, variables: Vec<CopulaVariable>, grid: Vec<CorrelationMatrix>) -> Result<Self> {
        let s = Self { n_obs, variables, grid };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_obs == 0 {
            return Err(Error::InvalidParameters("copula scenario needs n_obs > 0".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::EmptyGrid { rejected: 0 });
        }
        for v in &self.variables {
            v.marginal.validate()?;
            if let Some(o) = &v.outlier {
                o.validate()?;
            }
        }
        let n = self.variables.len();
        if let Some(m) = self.grid.iter().find(|m| m.dim() != n) {
            return Err(Error::InvalidCorrelation(format!(
                "{n} variables but a {0}x{0} correlation matrix",
                m.dim()
            )));
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CopulaDraw {
    pub table: DataTable,
    pub grid_index: usize,
    /// Injected row per variable, if any.
    pub injected: Vec<Option<usize>>,
}

/// Latent correlated standard normals, one vector per variable.
pub fn latent_normals(corr: &CorrelationMatrix, n_obs: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let d = corr.dim();
    let l = corr.cholesky_factor();
    let mut out = vec![Vec::with_capacity(n_obs); d];
    let mut e = vec![0.0; d];
    for _ in 0..n_obs {
        for x in e.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        for (i, col) in out.iter_mut().enumerate() {
            let z: f64 = (0..=i).map(|j| l[(i, j)] * e[j]).sum();
            col.push(z);
        }
    }
    out
}

/// One replicate: correlated normals, normal CDF, marginal inverse CDFs,
/// then outlier injection.
pub fn simulate_copula_table(scenario: &CopulaScenario, rng: &mut impl Rng) -> Result<CopulaDraw> {
    scenario.validate()?;
    let grid_index = rng.random_range(0..scenario.grid.len());
    let latent = latent_normals(&scenario.grid[grid_index], scenario.n_obs, rng);
    let mut columns = Vec::with_capacity(scenario.variables.len());
    let mut injected = Vec::with_capacity(scenario.variables.len());
    for (var, z) in scenario.variables.iter().zip(latent) {
        let sampler = var.marginal.sampler();
        let mut values: Vec<f64> = z.into_iter().map(|z| sampler.quantile(std_normal_cdf(z))).collect();
        let mut at = None;
        if let Some(o) = &var.outlier {
            if rng.random::<f64>() < o.probability {
                let i = inject_outlier(&mut values, &o.rule, rng)?;
                if var.marginal.distribution.family().is_discrete() {
                    // counts stay integral; rounding up keeps it above the fence
                    values[i] = values[i].ceil();
                }
                at = Some(i);
            }
        }
        injected.push(at);
        columns.push(NumericColumn::new(var.name.clone(), values)?);
    }
    Ok(CopulaDraw {
        table: DataTable::new(columns)?,
        grid_index,
        injected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(a: &str, b: &str, values: &[f64]) -> PairValues {
        PairValues {
            a: a.into(),
            b: b.into(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn zero_pairs_give_identity() {
        let g = correlation_grid(&["a", "b", "c"], &[pv("a", "b", &[0.0])]).unwrap();
        assert_eq!(g.matrices.len(), 1);
        assert_eq!(g.matrices[0].matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn grid_product_size() {
        let g = correlation_grid(
            &["m", "p", "t"],
            &[
                pv("m", "p", &[-0.05, 0.0, 0.05]),
                pv("m", "t", &[-0.45, -0.3]),
                pv("p", "t", &[0.0]),
            ],
        )
        .unwrap();
        assert_eq!(g.matrices.len(), 6);
        assert_eq!(g.rejected, 0);
        assert_eq!(g.matrices[1].get(0, 2), -0.3);
        assert_eq!(g.matrices[2].get(1, 0), 0.0);
    }

    #[test]
    fn rejects_non_pd() {
        assert!(CorrelationMatrix::from_lower(3, &[0.9, 0.9, -0.9]).is_err());
        assert!(CorrelationMatrix::from_lower(3, &[0.9, 0.9, 0.9]).is_ok());
        let err = correlation_grid(&["a", "b", "c"], &[pv("a", "b", &[0.9]), pv("a", "c", &[0.9]), pv("b", "c", &[-0.9])]);
        assert!(matches!(err, Err(Error::EmptyGrid { rejected: 1 })));
    }

    #[test]
    fn serde_round_trip() {
        let m = CorrelationMatrix::from_lower(2, &[0.25]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,0.25],[0.25,1.0]]");
        let back: CorrelationMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<CorrelationMatrix>("[[1.0,2.0],[2.0,1.0]]").is_err());
    }
}
