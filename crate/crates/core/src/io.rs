//! JSON documents for problems, solutions, perturbations and reports.
//!
//! Matrices are row-major nested arrays; each family (`"A"`, `"X"`, `"dA"`,
//! ...) is an array of `p` matrices. Numbers are written with shortest
//! round-trip formatting, so reading a written document reproduces every
//! value bit for bit. Non-finite values (bounds that do not apply) are
//! written as `null`.

use serde::{Deserialize, Serialize};

use crate::backward_error::BackwardErrorReport;
use crate::error::Issue;
use crate::model::{PerturbationSet, PgcsProblem, PgcsSolution, ResidualSet, ToleranceSet};
use crate::{Matrix, PgcsError, Result};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub p: usize,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
    #[serde(rename = "C")]
    pub c: Vec<Rows>,
    #[serde(rename = "D")]
    pub d: Vec<Rows>,
    #[serde(rename = "E")]
    pub e: Vec<Rows>,
    #[serde(rename = "F")]
    pub f: Vec<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    #[serde(rename = "X")]
    pub x: Vec<Rows>,
    #[serde(rename = "Y")]
    pub y: Vec<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDoc {
    #[serde(rename = "dA")]
    pub da: Vec<Rows>,
    #[serde(rename = "dB")]
    pub db: Vec<Rows>,
    #[serde(rename = "dC")]
    pub dc: Vec<Rows>,
    #[serde(rename = "dD")]
    pub dd: Vec<Rows>,
    #[serde(rename = "dE")]
    pub de: Vec<Rows>,
    #[serde(rename = "dF")]
    pub df: Vec<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDoc {
    #[serde(rename = "R1")]
    pub r1: Vec<Rows>,
    #[serde(rename = "R2")]
    pub r2: Vec<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackwardErrorDoc {
    pub lower: f64,
    pub upper: f64,
    pub residual_norm: f64,
    pub attaining_perturbation: PerturbationDoc,
}

pub fn matrix_rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn family_rows(fam: &[Matrix]) -> Vec<Rows> {
    fam.iter().map(matrix_rows).collect()
}

fn rows_matrix(field: String, rows: &Rows, issues: &mut Vec<Issue>) -> Matrix {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        issues.push(Issue {
            field,
            message: "rows have different lengths".into(),
        });
        return Matrix::zeros(0, 0);
    }
    Matrix::from_fn(nr, nc, |i, j| rows[i][j])
}

fn family_matrices(name: &str, fam: &[Rows], issues: &mut Vec<Issue>) -> Vec<Matrix> {
    fam.iter()
        .enumerate()
        .map(|(k, rows)| rows_matrix(format!("{name}[{}]", k + 1), rows, issues))
        .collect()
}

fn finish<T>(value: T, issues: Vec<Issue>) -> Result<T> {
    if issues.is_empty() {
        Ok(value)
    } else {
        Err(PgcsError::Invalid(issues))
    }
}

impl From<&PgcsProblem> for ProblemDoc {
    fn from(p: &PgcsProblem) -> Self {
        ProblemDoc {
            p: p.p,
            m: p.m,
            n: p.n,
            a: family_rows(&p.a),
            b: family_rows(&p.b),
            c: family_rows(&p.c),
            d: family_rows(&p.d),
            e: family_rows(&p.e),
            f: family_rows(&p.f),
        }
    }
}

impl ProblemDoc {
    /// Converts and validates against the declared `p`, `m`, `n`.
    pub fn into_problem(self) -> Result<PgcsProblem> {
        let mut issues = Vec::new();
        let problem = PgcsProblem {
            p: self.p,
            m: self.m,
            n: self.n,
            a: family_matrices("A", &self.a, &mut issues),
            b: family_matrices("B", &self.b, &mut issues),
            c: family_matrices("C", &self.c, &mut issues),
            d: family_matrices("D", &self.d, &mut issues),
            e: family_matrices("E", &self.e, &mut issues),
            f: family_matrices("F", &self.f, &mut issues),
        };
        if self.p == 0 || self.m == 0 || self.n == 0 {
            issues.push(Issue {
                field: "p/m/n".into(),
                message: "period and dimensions must be at least 1".into(),
            });
        }
        let problem = finish(problem, issues)?;
        problem.validate()?;
        Ok(problem)
    }
}

impl From<&PgcsSolution> for SolutionDoc {
    fn from(s: &PgcsSolution) -> Self {
        SolutionDoc {
            x: family_rows(&s.x),
            y: family_rows(&s.y),
        }
    }
}

impl SolutionDoc {
    pub fn into_solution(self) -> Result<PgcsSolution> {
        let mut issues = Vec::new();
        let sol = PgcsSolution {
            x: family_matrices("X", &self.x, &mut issues),
            y: family_matrices("Y", &self.y, &mut issues),
        };
        finish(sol, issues)
    }
}

impl From<&PerturbationSet> for PerturbationDoc {
    fn from(d: &PerturbationSet) -> Self {
        PerturbationDoc {
            da: family_rows(&d.da),
            db: family_rows(&d.db),
            dc: family_rows(&d.dc),
            dd: family_rows(&d.dd),
            de: family_rows(&d.de),
            df: family_rows(&d.df),
        }
    }
}

impl PerturbationDoc {
    pub fn into_perturbation(self) -> Result<PerturbationSet> {
        let mut issues = Vec::new();
        let d = PerturbationSet {
            da: family_matrices("dA", &self.da, &mut issues),
            db: family_matrices("dB", &self.db, &mut issues),
            dc: family_matrices("dC", &self.dc, &mut issues),
            dd: family_matrices("dD", &self.dd, &mut issues),
            de: family_matrices("dE", &self.de, &mut issues),
            df: family_matrices("dF", &self.df, &mut issues),
        };
        finish(d, issues)
    }
}

impl From<&ResidualSet> for ResidualDoc {
    fn from(r: &ResidualSet) -> Self {
        ResidualDoc {
            r1: family_rows(&r.r1),
            r2: family_rows(&r.r2),
        }
    }
}

impl From<&BackwardErrorReport> for BackwardErrorDoc {
    fn from(r: &BackwardErrorReport) -> Self {
        BackwardErrorDoc {
            lower: r.lower,
            upper: r.upper,
            residual_norm: r.residual_norm,
            attaining_perturbation: (&r.attaining_perturbation).into(),
        }
    }
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| PgcsError::Json(e.to_string()))
}

pub fn parse_problem(text: &str) -> Result<PgcsProblem> {
    parse::<ProblemDoc>(text)?.into_problem()
}

pub fn parse_solution(text: &str) -> Result<PgcsSolution> {
    parse::<SolutionDoc>(text)?.into_solution()
}

pub fn parse_perturbation(text: &str) -> Result<PerturbationSet> {
    parse::<PerturbationDoc>(text)?.into_perturbation()
}

pub fn parse_tolerances(text: &str) -> Result<ToleranceSet> {
    parse(text)
}

/// Pretty-printed JSON.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| PgcsError::Json(e.to_string()))
}
