//! Artifact writers. Every file is written to a temporary name and renamed
//! into place so readers never observe a partial artifact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lqmfg::{DeviationReport, Equilibrium, MeanFieldPath, PopulationSample, RateFitReport};
use nalgebra::{DMatrix, DVector};

use crate::CliError;

pub(crate) struct Artifacts {
    dir: PathBuf,
    prefix: String,
    names: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), prefix: prefix.to_string(), names: Vec::new() })
    }

    pub fn file_name(&self, name: &str) -> String {
        format!("{}{}", self.prefix, name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let file = self.file_name(name);
        let target = self.dir.join(&file);
        let tmp = self.dir.join(format!(".{file}.tmp"));
        let io = |source| CliError::Io { path: target.clone(), source };
        fs::write(&tmp, contents).map_err(io)?;
        fs::rename(&tmp, &target).map_err(io)?;
        if !self.names.contains(&file) {
            self.names.push(file);
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        text.push('\n');
        self.write(name, &text)
    }
}

fn num(out: &mut String, x: f64) {
    let _ = write!(out, ",{x:.16e}");
}

fn matrix_header(h: &mut String, name: &str, rows: usize, cols: usize) {
    for r in 1..=rows {
        for c in 1..=cols {
            let _ = write!(h, ",{name}_{r}_{c}");
        }
    }
}

fn vector_header(h: &mut String, name: &str, len: usize) {
    for i in 1..=len {
        let _ = write!(h, ",{name}_{i}");
    }
}

fn matrix_row(out: &mut String, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            num(out, m[(r, c)]);
        }
    }
}

fn vector_row(out: &mut String, v: &DVector<f64>) {
    for x in v.iter() {
        num(out, *x);
    }
}

fn time(out: &mut String, t: f64) {
    let _ = write!(out, "{t:.16e}");
}

pub(crate) fn riccati_csv(eq: &Equilibrium) -> String {
    let model = eq.model();
    let (n, k) = (model.state_dim(), model.control_dim());
    let (sol, law) = (eq.solution(), eq.law());
    let mut out = String::from("t");
    matrix_header(&mut out, "P", n, n);
    matrix_header(&mut out, "Gamma", n, n);
    vector_header(&mut out, "Phi", n);
    matrix_header(&mut out, "Sigma", k, k);
    matrix_header(&mut out, "Kz", k, n);
    matrix_header(&mut out, "Km", k, n);
    vector_header(&mut out, "cu", k);
    out.push('\n');
    for (j, t) in model.grid().times().enumerate() {
        time(&mut out, t);
        matrix_row(&mut out, &sol.p[j]);
        matrix_row(&mut out, &sol.gamma[j]);
        vector_row(&mut out, &sol.phi[j]);
        matrix_row(&mut out, &sol.sigma[j]);
        matrix_row(&mut out, &law.k_z[j]);
        matrix_row(&mut out, &law.k_m[j]);
        vector_row(&mut out, &law.c_u[j]);
        out.push('\n');
    }
    out
}

pub(crate) fn meanfield_csv(path: &MeanFieldPath) -> String {
    let n = path.em[0].len();
    let mut out = String::from("t");
    vector_header(&mut out, "m", n);
    vector_header(&mut out, "Em", n);
    out.push('\n');
    for (j, t) in path.grid.times().enumerate() {
        time(&mut out, t);
        vector_row(&mut out, &path.m[j]);
        vector_row(&mut out, &path.em[j]);
        out.push('\n');
    }
    out
}

pub(crate) fn sample_meanfield_csv(s: &PopulationSample) -> String {
    let n = s.em[0].len();
    let mut out = String::from("t");
    vector_header(&mut out, "m", n);
    vector_header(&mut out, "Em", n);
    vector_header(&mut out, "xbar", n);
    out.push('\n');
    for (j, t) in s.grid.times().enumerate() {
        time(&mut out, t);
        vector_row(&mut out, &s.m[j]);
        vector_row(&mut out, &s.em[j]);
        vector_row(&mut out, &s.state_average[j]);
        out.push('\n');
    }
    out
}

/// States of every agent, one row per node.
pub(crate) fn population_csv(s: &PopulationSample) -> String {
    let n = s.em[0].len();
    let mut out = String::from("t");
    vector_header(&mut out, "xbar", n);
    for a in 1..=s.n_agents {
        vector_header(&mut out, &format!("x{a:03}"), n);
    }
    out.push('\n');
    for (j, t) in s.grid.times().enumerate() {
        time(&mut out, t);
        vector_row(&mut out, &s.state_average[j]);
        for x in &s.x {
            vector_row(&mut out, &x[j]);
        }
        out.push('\n');
    }
    out
}

pub(crate) fn agent_csv(s: &PopulationSample, i: usize) -> String {
    let n = s.em[0].len();
    let k = s.u[i][0].len();
    let mut out = String::from("t");
    vector_header(&mut out, "zhat", n);
    vector_header(&mut out, "zbar", n);
    vector_header(&mut out, "x", n);
    vector_header(&mut out, "u", k);
    out.push('\n');
    for (j, t) in s.grid.times().enumerate() {
        time(&mut out, t);
        vector_row(&mut out, &s.z_hat[i][j]);
        vector_row(&mut out, &s.z_bar[i][j]);
        vector_row(&mut out, &s.x[i][j]);
        vector_row(&mut out, &s.u[i][j]);
        out.push('\n');
    }
    out
}

pub(crate) fn costs_csv(s: &PopulationSample) -> String {
    let mut out = String::from("agent,J_central,J_limit\n");
    for (i, (c, l)) in s.j_central.iter().zip(&s.j_limit).enumerate() {
        let _ = write!(out, "{}", i + 1);
        num(&mut out, *c);
        num(&mut out, *l);
        out.push('\n');
    }
    out
}

pub(crate) fn rate_csv(r: &RateFitReport) -> String {
    let mut out = String::from("N,statistic,stderr\n");
    for ((n, v), e) in r.ns.iter().zip(&r.values).zip(&r.stderrs) {
        let _ = write!(out, "{n}");
        num(&mut out, *v);
        num(&mut out, *e);
        out.push('\n');
    }
    out
}

pub(crate) fn deviation_csv(r: &DeviationReport) -> String {
    let mut out = String::from(
        "candidate,cost,cost_stderr,gain,gain_stderr,limit_cost,limit_cost_stderr,limit_gain,limit_gain_stderr,identical\n",
    );
    for c in &r.candidates {
        out.push_str(&c.description.replace(',', ";"));
        for x in [
            c.cost,
            c.cost_stderr,
            c.gain,
            c.gain_stderr,
            c.limit_cost,
            c.limit_cost_stderr,
            c.limit_gain,
            c.limit_gain_stderr,
        ] {
            num(&mut out, x);
        }
        let _ = writeln!(out, ",{}", c.identical);
    }
    out
}
