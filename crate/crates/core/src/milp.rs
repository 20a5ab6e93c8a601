//! Sparse MILP container shared by the formulation builders and the solvers.
//!
//! Variables carry structured names (`x[1-5][1]`, `o[4][2][0]`, `nu`, …) so
//! that tests, the CLI, and the dual decomposition can address solution
//! entries portably. The internal sense is always minimization.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("fixing {value} on column `{column}` contradicts bounds [{lower}, {upper}]")]
    InfeasibleFixing {
        column: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("row `{row}` references column {col} out of range")]
    BadColumnRef { row: String, col: usize },
    #[error("column `{column}` has crossed bounds [{lower}, {upper}]")]
    CrossedBounds {
        column: String,
        lower: f64,
        upper: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

/// One sparse constraint row: `sum(coeffs) sense rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Dense objective coefficients, one per column. Minimized.
    pub objective: Vec<f64>,
    var_index: HashMap<String, usize>,
}

impl Default for MilpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl MilpProblem {
    pub fn new() -> Self {
        MilpProblem {
            variables: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            var_index: HashMap::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a column and returns its index. Panics on duplicate names or
    /// crossed bounds; both indicate a builder bug.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> usize {
        let name = name.into();
        assert!(
            lower <= upper,
            "variable {name}: crossed bounds [{lower}, {upper}]"
        );
        let idx = self.variables.len();
        let prev = self.var_index.insert(name.clone(), idx);
        assert!(prev.is_none(), "duplicate variable name {name}");
        self.variables.push(Variable {
            name,
            lower,
            upper,
            kind,
        });
        self.objective.push(0.0);
        idx
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, col: usize, coeff: f64) {
        self.objective[col] = coeff;
    }

    pub fn add_objective(&mut self, col: usize, coeff: f64) {
        self.objective[col] += coeff;
    }

    /// Column index for a structured name.
    pub fn col(&self, name: &str) -> Result<usize, MilpError> {
        self.var_index
            .get(name)
            .copied()
            .ok_or_else(|| MilpError::UnknownColumn(name.to_string()))
    }

    pub fn try_col(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(values)
            .map(|(c, v)| c * v)
            .sum()
    }

    /// Clone with the given columns pinched to fixed values. Fails if a
    /// fixing falls outside the current bounds (distinct from the problem
    /// itself being infeasible).
    pub fn with_fixed<'a, I>(&self, fixings: I) -> Result<MilpProblem, MilpError>
    where
        I: IntoIterator<Item = (&'a usize, &'a f64)>,
    {
        let mut p = self.clone();
        for (&col, &value) in fixings {
            let v = &mut p.variables[col];
            if value < v.lower - 1e-9 || value > v.upper + 1e-9 {
                return Err(MilpError::InfeasibleFixing {
                    column: v.name.clone(),
                    value,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            v.lower = value;
            v.upper = value;
        }
        Ok(p)
    }

    /// Checks a point against every row, bound, and integrality marker,
    /// independent of any solver state. Returns the violated row/bound
    /// descriptions with their violation magnitudes.
    pub fn check_point(&self, values: &[f64], tol: f64) -> Vec<(String, f64)> {
        let mut out = self.check_rows(values, tol);
        for (j, var) in self.variables.iter().enumerate() {
            if var.kind.is_integral() {
                let v = values[j];
                let frac = (v - v.round()).abs();
                if frac > tol.max(1e-6) {
                    out.push((format!("integrality {}", var.name), frac));
                }
            }
        }
        out
    }

    /// Row and bound violations only; integrality markers are ignored, so
    /// this also applies to LP relaxation points.
    pub fn check_rows(&self, values: &[f64], tol: f64) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (j, var) in self.variables.iter().enumerate() {
            let v = values[j];
            if v < var.lower - tol {
                out.push((format!("bound lower {}", var.name), var.lower - v));
            }
            if v > var.upper + tol {
                out.push((format!("bound upper {}", var.name), v - var.upper));
            }
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(c, a)| a * values[c]).sum();
            let scale = 1.0 + row.rhs.abs();
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            if viol > tol * scale {
                out.push((format!("row {}", row.name), viol));
            }
        }
        out
    }

    /// Writes the problem in LP text format with 12 significant digits,
    /// for cross-checking against external solvers.
    pub fn write_lp<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        fn num(x: f64) -> String {
            format!("{:.11e}", x)
        }
        // LP format identifiers cannot contain brackets; rewrite to _.
        fn ident(name: &str) -> String {
            name.replace(['[', ']'], "_").replace('-', "m")
        }
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(
                    w,
                    " {} {} {}",
                    if c < 0.0 {
                        "-"
                    } else if first {
                        ""
                    } else {
                        "+"
                    },
                    num(c.abs()),
                    ident(&self.variables[j].name)
                )?;
                first = false;
            }
        }
        if first {
            write!(w, " 0 {}", ident(&self.variables[0].name))?;
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, " r{}:", i)?;
            let mut first = true;
            for &(c, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                write!(
                    w,
                    " {} {} {}",
                    if a < 0.0 {
                        "-"
                    } else if first {
                        ""
                    } else {
                        "+"
                    },
                    num(a.abs()),
                    ident(&self.variables[c].name)
                )?;
                first = false;
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            writeln!(w, " {} {}", op, num(row.rhs))?;
        }
        writeln!(w, "Bounds")?;
        for var in &self.variables {
            let lo = if var.lower.is_finite() {
                num(var.lower)
            } else {
                "-inf".to_string()
            };
            let hi = if var.upper.is_finite() {
                num(var.upper)
            } else {
                "+inf".to_string()
            };
            writeln!(w, " {} <= {} <= {}", lo, ident(&var.name), hi)?;
        }
        let ints: Vec<&Variable> = self
            .variables
            .iter()
            .filter(|v| v.kind.is_integral())
            .collect();
        if !ints.is_empty() {
            writeln!(w, "Generals")?;
            for v in ints {
                writeln!(w, " {}", ident(&v.name))?;
            }
        }
        writeln!(w, "End")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// Row duals recovered from the final reduced costs on slacks.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    GapLimit,
    TimeLimit,
    Infeasible,
}

/// One convergence-log record; the CSV schema is
/// `elapsed_s,nodes,incumbent,best_bound,gap`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogRecord {
    pub elapsed_s: f64,
    pub nodes: usize,
    pub incumbent: f64,
    pub best_bound: f64,
    pub gap: f64,
}

pub fn write_convergence_csv<W: Write>(w: &mut W, log: &[LogRecord]) -> std::io::Result<()> {
    writeln!(w, "elapsed_s,nodes,incumbent,best_bound,gap")?;
    for r in log {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.elapsed_s, r.nodes, r.incumbent, r.best_bound, r.gap
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub values: Vec<f64>,
    /// Incumbent objective (minimization).
    pub objective: f64,
    pub best_bound: f64,
    pub mip_gap: f64,
    pub status: MilpStatus,
    pub node_count: usize,
    pub wall_time: f64,
    pub log: Vec<LogRecord>,
}

impl MilpSolution {
    pub fn infeasible(node_count: usize, wall_time: f64) -> Self {
        MilpSolution {
            values: Vec::new(),
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            mip_gap: 0.0,
            status: MilpStatus::Infeasible,
            node_count,
            wall_time,
            log: Vec::new(),
        }
    }
}

/// Relative MIP gap: `|incumbent - bound| / max(1e-9, |incumbent|)`.
pub fn mip_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    (incumbent - bound).abs() / f64::max(1e-9, incumbent.abs())
}
