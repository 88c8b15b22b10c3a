use std::collections::HashSet;
use std::fmt;

use crate::error::ModelError;

/// Ordinal handle of a model variable. Stable for the lifetime of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef(pub usize);

impl VarRef {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Higher values are branched on first.
    pub branch_priority: u32,
    pub name: String,
}

impl Variable {
    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
            branch_priority: 0,
            name: name.into(),
        }
    }

    pub fn integer(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            kind: VarKind::Integer,
            branch_priority: 0,
            name: name.into(),
        }
    }

    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            kind: VarKind::Continuous,
            branch_priority: 0,
            name: name.into(),
        }
    }

    pub fn with_priority(mut self, priority: u32) -> Self {
        self.branch_priority = priority;
        self
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.lower.is_nan() || self.upper.is_nan() {
            return Err(ModelError::NanBound(self.name.clone()));
        }
        if self.lower > self.upper {
            return Err(ModelError::InvertedBounds {
                name: self.name.clone(),
                lower: self.lower,
                upper: self.upper,
            });
        }
        if self.kind == VarKind::Binary && (self.lower < 0.0 || self.upper > 1.0) {
            return Err(ModelError::BinaryBounds {
                name: self.name.clone(),
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarRef, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

impl LinearConstraint {
    pub fn new(name: impl Into<String>, terms: Vec<(VarRef, f64)>, sense: Sense, rhs: f64) -> Self {
        Self {
            terms,
            sense,
            rhs,
            name: name.into(),
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<(VarRef, f64)>,
    sense: ObjectiveSense,
}

impl MilpModel {
    pub fn new(sense: ObjectiveSense) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn add_variable(&mut self, variable: Variable) -> Result<VarRef, ModelError> {
        variable.check()?;
        self.variables.push(variable);
        Ok(VarRef(self.variables.len() - 1))
    }

    /// Stores the constraint verbatim and returns its ordinal.
    pub fn add_constraint(&mut self, constraint: LinearConstraint) -> Result<usize, ModelError> {
        self.check_terms(&constraint.terms, &constraint.name)?;
        if !constraint.rhs.is_finite() {
            return Err(ModelError::NonFiniteCoefficient(constraint.name));
        }
        self.constraints.push(constraint);
        Ok(self.constraints.len() - 1)
    }

    pub fn add_constraint_terms(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarRef, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        self.add_constraint(LinearConstraint::new(name, terms, sense, rhs))
    }

    pub fn set_objective(&mut self, terms: Vec<(VarRef, f64)>) -> Result<(), ModelError> {
        self.check_terms(&terms, "objective")?;
        self.objective = terms;
        Ok(())
    }

    pub fn set_objective_sense(&mut self, sense: ObjectiveSense) {
        self.sense = sense;
    }

    pub fn set_variable_kind(&mut self, var: VarRef, kind: VarKind) -> Result<(), ModelError> {
        let v = self.var_mut(var)?;
        let mut updated = v.clone();
        updated.kind = kind;
        updated.check()?;
        *v = updated;
        Ok(())
    }

    /// Collapses the bounds of `var` to `[value, value]`.
    pub fn fix_variable(&mut self, var: VarRef, value: f64) -> Result<(), ModelError> {
        const TOL: f64 = 1e-9;
        let v = self.var_mut(var)?;
        if value.is_nan() || value < v.lower - TOL || value > v.upper + TOL {
            return Err(ModelError::FixOutOfBounds {
                var,
                value,
                lower: v.lower,
                upper: v.upper,
            });
        }
        if v.kind.is_integral() && (value - value.round()).abs() > TOL {
            return Err(ModelError::NonIntegralFix { var, value });
        }
        let value = if v.kind.is_integral() { value.round() } else { value };
        v.lower = value;
        v.upper = value;
        Ok(())
    }

    pub fn set_bounds(&mut self, var: VarRef, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self.var_mut(var)?;
        let mut updated = v.clone();
        updated.lower = lower;
        updated.upper = upper;
        updated.check()?;
        *v = updated;
        Ok(())
    }

    pub fn set_branch_priority(&mut self, var: VarRef, priority: u32) -> Result<(), ModelError> {
        self.var_mut(var)?.branch_priority = priority;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarRef) -> &Variable {
        &self.variables[var.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarRef, f64)] {
        &self.objective
    }

    pub fn sense(&self) -> ObjectiveSense {
        self.sense
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest bound, row or integrality violation of `values`, split into
    /// (row/bound violation, integrality violation).
    pub fn max_violation(&self, values: &[f64]) -> (f64, f64) {
        let mut feas = 0.0f64;
        let mut integ = 0.0f64;
        for (v, &x) in self.variables.iter().zip(values) {
            feas = feas.max(v.lower - x).max(x - v.upper);
            if v.kind.is_integral() {
                integ = integ.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            feas = feas.max(c.violation(values));
        }
        (feas, integ)
    }

    fn var_mut(&mut self, var: VarRef) -> Result<&mut Variable, ModelError> {
        self.variables
            .get_mut(var.0)
            .ok_or(ModelError::UnknownVariable(var))
    }

    fn check_terms(&self, terms: &[(VarRef, f64)], context: &str) -> Result<(), ModelError> {
        let mut seen = HashSet::with_capacity(terms.len());
        for &(var, coef) in terms {
            if var.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable(var));
            }
            if !coef.is_finite() {
                return Err(ModelError::NonFiniteCoefficient(context.to_string()));
            }
            if !seen.insert(var) {
                return Err(ModelError::DuplicateTerm {
                    var,
                    context: context.to_string(),
                });
            }
        }
        Ok(())
    }
}

fn write_terms(f: &mut fmt::Formatter<'_>, model: &MilpModel, terms: &[(VarRef, f64)]) -> fmt::Result {
    if terms.is_empty() {
        return f.write_str("0");
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        let name = &model.variables[v.0].name;
        if k == 0 {
            write!(f, "{c} {name}")?;
        } else if c < 0.0 {
            write!(f, " - {} {name}", -c)?;
        } else {
            write!(f, " + {c} {name}")?;
        }
    }
    Ok(())
}

/// Plain-text dump: one line per variable, one line per constraint.
impl fmt::Display for MilpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sense = match self.sense {
            ObjectiveSense::Minimize => "minimize",
            ObjectiveSense::Maximize => "maximize",
        };
        write!(f, "{sense} ")?;
        write_terms(f, self, &self.objective)?;
        writeln!(f)?;
        for (j, v) in self.variables.iter().enumerate() {
            writeln!(
                f,
                "var {j} {} {:?} [{}, {}] prio={}",
                v.name, v.kind, v.lower, v.upper, v.branch_priority
            )?;
        }
        for (i, c) in self.constraints.iter().enumerate() {
            write!(f, "row {i} {}: ", c.name)?;
            write_terms(f, self, &c.terms)?;
            writeln!(f, " {} {}", c.sense, c.rhs)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_variable_gets_ordinal_zero() {
        let mut m = MilpModel::new(ObjectiveSense::Minimize);
        assert_eq!(m.add_variable(Variable::binary("x")).unwrap(), VarRef(0));
        let y = m.add_variable(Variable::integer("y", 0.0, 4.0)).unwrap();
        assert_eq!(m.variable(y).kind, VarKind::Integer);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = MilpModel::new(ObjectiveSense::Minimize);
        let err = m.add_variable(Variable::integer("z", 2.0, 1.0)).unwrap_err();
        assert!(matches!(err, ModelError::InvertedBounds { .. }));
    }

    #[test]
    fn constraint_terms_validated() {
        let mut m = MilpModel::new(ObjectiveSense::Minimize);
        let x0 = m.add_variable(Variable::binary("x0")).unwrap();
        let x1 = m.add_variable(Variable::binary("x1")).unwrap();
        assert_eq!(
            m.add_constraint_terms("c", vec![(x0, 1.0), (x1, 1.0)], Sense::Le, 1.0).unwrap(),
            0
        );
        assert!(matches!(
            m.add_constraint_terms("d", vec![(x0, 1.0), (x0, 1.0)], Sense::Le, 1.0),
            Err(ModelError::DuplicateTerm { .. })
        ));
        assert!(matches!(
            m.add_constraint_terms("e", vec![(VarRef(7), 1.0)], Sense::Le, 1.0),
            Err(ModelError::UnknownVariable(VarRef(7)))
        ));
        // vacuous rows are stored as given
        assert_eq!(m.add_constraint_terms("f", vec![], Sense::Le, -1.0).unwrap(), 1);
    }

    #[test]
    fn kind_change_and_fixing() {
        let mut m = MilpModel::new(ObjectiveSense::Minimize);
        let x = m.add_variable(Variable::binary("x")).unwrap();
        m.set_variable_kind(x, VarKind::Continuous).unwrap();
        assert_eq!(m.variable(x).kind, VarKind::Continuous);
        assert_eq!((m.variable(x).lower, m.variable(x).upper), (0.0, 1.0));

        let b = m.add_variable(Variable::binary("b")).unwrap();
        m.fix_variable(b, 1.0).unwrap();
        assert_eq!((m.variable(b).lower, m.variable(b).upper), (1.0, 1.0));

        let c = m.add_variable(Variable::binary("c")).unwrap();
        assert!(matches!(
            m.fix_variable(c, 0.5),
            Err(ModelError::NonIntegralFix { .. })
        ));
        assert!(matches!(
            m.fix_variable(c, 2.0),
            Err(ModelError::FixOutOfBounds { .. })
        ));
    }

    #[test]
    fn dump_has_one_line_per_item() {
        let mut m = MilpModel::new(ObjectiveSense::Maximize);
        let x = m.add_variable(Variable::binary("x")).unwrap();
        let y = m.add_variable(Variable::binary("y")).unwrap();
        m.add_constraint_terms("c0", vec![(x, 1.0), (y, -1.0)], Sense::Ge, 0.0).unwrap();
        m.set_objective(vec![(x, 1.0)]).unwrap();
        let text = m.to_string();
        assert_eq!(text.lines().count(), 1 + 2 + 1);
        assert!(text.contains("row 0 c0: 1 x - 1 y >= 0"));
    }
}
