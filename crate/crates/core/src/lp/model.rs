use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn as_str(self) -> &'static str {
        match self {
            Relation::Le => "le",
            Relation::Eq => "eq",
            Relation::Ge => "ge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub obj: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

/// A minimization problem over bounded variables and sparse rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    vars: Vec<Variable>,
    cons: Vec<Constraint>,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) || name == ":" {
        return Err(Error::Model(format!("invalid name `{name}`")));
    }
    Ok(())
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> Result<VarId> {
        self.push_var(name.into(), lb, ub, obj, false)
    }

    pub fn add_int_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> Result<VarId> {
        self.push_var(name.into(), lb, ub, obj, true)
    }

    fn push_var(&mut self, name: String, lb: f64, ub: f64, obj: f64, integer: bool) -> Result<VarId> {
        check_name(&name)?;
        if lb.is_nan() || ub.is_nan() || lb > ub || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
            return Err(Error::Model(format!("variable `{name}` has bounds [{lb}, {ub}]")));
        }
        if !obj.is_finite() {
            return Err(Error::Model(format!("variable `{name}` has objective {obj}")));
        }
        self.vars.push(Variable { name, lb, ub, obj, integer });
        Ok(VarId(self.vars.len() - 1))
    }

    pub fn add_con(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        rel: Relation,
        rhs: f64,
    ) -> Result<ConId> {
        let name = name.into();
        check_name(&name)?;
        if !rhs.is_finite() {
            return Err(Error::Model(format!("constraint `{name}` has rhs {rhs}")));
        }
        for &(v, c) in &coeffs {
            if v.0 >= self.vars.len() {
                return Err(Error::Model(format!("constraint `{name}` references unknown variable #{}", v.0)));
            }
            if !c.is_finite() {
                return Err(Error::Model(format!("constraint `{name}` has coefficient {c}")));
            }
        }
        self.cons.push(Constraint { name, coeffs, rel, rhs });
        Ok(ConId(self.cons.len() - 1))
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn cons(&self) -> &[Constraint] {
        &self.cons
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    /// Copy with every integrality marker dropped.
    pub fn relaxed(&self) -> LinearModel {
        let mut m = self.clone();
        m.vars.iter_mut().for_each(|v| v.integer = false);
        m
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    pub fn set_bounds(&mut self, v: VarId, lb: f64, ub: f64) {
        self.vars[v.0].lb = lb;
        self.vars[v.0].ub = ub;
    }

    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, x)| v.obj * x).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lb - xv).max(xv - v.ub);
        }
        for c in &self.cons {
            let lhs: f64 = c.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum();
            let viol = match c.rel {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Canonical text form: one `var` line per variable, then one `con` line
    /// per constraint, in declaration order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vars {
            let _ = write!(out, "var {} {} {} {}", v.name, v.lb, v.ub, v.obj);
            if v.integer {
                out.push_str(" int");
            }
            out.push('\n');
        }
        for c in &self.cons {
            let _ = write!(out, "con {} {} {} :", c.name, c.rel.as_str(), c.rhs);
            for &(v, a) in &c.coeffs {
                let _ = write!(out, " {} {}", a, self.vars[v.0].name);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut model = LinearModel::new();
        let mut by_name = std::collections::HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
            match tok[0] {
                "var" => {
                    if !(tok.len() == 5 || (tok.len() == 6 && tok[5] == "int")) {
                        return Err(bad("expected `var name lb ub obj [int]`"));
                    }
                    let (lb, ub, obj) = (num(tok[2])?, num(tok[3])?, num(tok[4])?);
                    let id = model.push_var(tok[1].to_string(), lb, ub, obj, tok.len() == 6)?;
                    if by_name.insert(tok[1].to_string(), id).is_some() {
                        return Err(bad(&format!("duplicate variable `{}`", tok[1])));
                    }
                }
                "con" => {
                    if tok.len() < 5 || tok[4] != ":" || !(tok.len() - 5).is_multiple_of(2) {
                        return Err(bad("expected `con name rel rhs : coef var ...`"));
                    }
                    let rel = match tok[2] {
                        "le" => Relation::Le,
                        "eq" => Relation::Eq,
                        "ge" => Relation::Ge,
                        other => return Err(bad(&format!("unknown relation `{other}`"))),
                    };
                    let mut coeffs = Vec::new();
                    for pair in tok[5..].chunks(2) {
                        let v = by_name.get(pair[1]).ok_or_else(|| bad(&format!("unknown variable `{}`", pair[1])))?;
                        coeffs.push((*v, num(pair[0])?));
                    }
                    model.add_con(tok[1], coeffs, rel, num(tok[3])?)?;
                }
                other => return Err(bad(&format!("unknown record `{other}`"))),
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, f64::INFINITY, 0.1).unwrap();
        let y = m.add_int_var("y", -1.5, 2.0, 1.0 / 3.0).unwrap();
        m.add_con("c0", vec![(x, 1.0), (y, -2.25)], Relation::Ge, 0.7).unwrap();
        let text = m.to_text();
        assert_eq!(LinearModel::from_text(&text).unwrap(), m);
    }

    #[test]
    fn rejects_bad_input() {
        let mut m = LinearModel::new();
        assert!(m.add_var("a b", 0.0, 1.0, 0.0).is_err());
        assert!(m.add_var("x", 2.0, 1.0, 0.0).is_err());
        assert!(m.add_con("c", vec![(VarId(3), 1.0)], Relation::Le, 0.0).is_err());
        assert!(LinearModel::from_text("var x 0 1").is_err());
        assert!(LinearModel::from_text("con c le 1 : 1 x").is_err());
    }
}
