use super::{CaseError, NetworkCase};
use crate::{Mat, C64};

/// Bus admittance matrix Y = G + jB in per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub n_bus: usize,
    pub g: Mat,
    pub b: Mat,
}

impl AdmittanceMatrix {
    pub fn zeros(n_bus: usize) -> Self {
        AdmittanceMatrix { n_bus, g: Mat::zeros(n_bus, n_bus), b: Mat::zeros(n_bus, n_bus) }
    }

    pub fn entry(&self, i: usize, k: usize) -> C64 {
        C64::new(self.g[(i, k)], self.b[(i, k)])
    }

    fn add(&mut self, i: usize, k: usize, y: C64) {
        self.g[(i, k)] += y.re;
        self.b[(i, k)] += y.im;
    }

    /// Complex current injections I = Y·V for phasors V.
    pub fn currents(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n_bus).map(|i| (0..self.n_bus).map(|k| self.entry(i, k) * v[k]).sum()).collect()
    }
}

pub fn build_admittance(case: &NetworkCase) -> Result<AdmittanceMatrix, CaseError> {
    let n = case.n_bus();
    let idx = case.index_of();
    let mut y = AdmittanceMatrix::zeros(n);
    for (k, bus) in case.buses.iter().enumerate() {
        y.add(k, k, C64::new(bus.g_shunt, bus.b_shunt) / case.base_mva);
    }
    for (index, br) in case.branches.iter().enumerate() {
        if !br.status {
            continue;
        }
        let z = C64::new(br.r, br.x);
        if z.norm_sqr() == 0.0 {
            return Err(CaseError::ZeroImpedanceBranch(index));
        }
        let ys = z.inv();
        let charging = C64::new(0.0, br.b_charging / 2.0);
        let t = C64::from_polar(br.ratio(), br.shift.to_radians());
        let f = idx[&br.from_bus];
        let to = idx[&br.to_bus];
        y.add(f, f, (ys + charging) / (t * t.conj()));
        y.add(to, to, ys + charging);
        y.add(f, to, -ys / t.conj());
        y.add(to, f, -ys / t);
    }
    Ok(y)
}
