//! Writes every MILP handed to the wrapped backend as a text dump.

use std::fs;
use std::path::PathBuf;

use griddef_core::lp::Name;
use griddef_core::{Backend, LinearModel, SolveOutcome, SolverError};

pub struct DumpingBackend<B> {
    inner: B,
    dir: PathBuf,
    count: usize,
}

impl<B: Backend> DumpingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir, count: 0 })
    }

    pub fn dumped(&self) -> usize {
        self.count
    }
}

impl<B: Backend> Backend for DumpingBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn solve_lp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        self.inner.solve_lp(model)
    }

    fn solve_milp(&mut self, model: &LinearModel) -> Result<SolveOutcome, SolverError> {
        self.count += 1;
        let kind = if model.find_var(&Name::scalar("xi")).is_some() {
            "master"
        } else {
            "subproblem"
        };
        let path = self.dir.join(format!("{:04}_{kind}.txt", self.count));
        fs::write(&path, model.dump()).map_err(|e| SolverError::Backend(format!("writing {}: {e}", path.display())))?;
        self.inner.solve_milp(model)
    }
}
