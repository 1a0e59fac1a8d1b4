use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{DiscretizedPath, Sample};
use super::permutation::{compose, Permutation};
use super::HolonomyError;
use crate::family::{OperatorFamily, ParameterPoint};
use crate::spectra::{self, min_pairwise_gap, LabeledSpectrum, SpectraError, Spectrum};

/// Anything that yields a spectrum at a parameter point: an operator family,
/// or a propagation experiment that measures one.
pub trait SpectrumSource: Sync {
    fn spectrum(&self, x: &ParameterPoint) -> Result<Spectrum, HolonomyError>;
}

impl SpectrumSource for OperatorFamily {
    fn spectrum(&self, x: &ParameterPoint) -> Result<Spectrum, HolonomyError> {
        Ok(spectra::eigenvalues(self, x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingOptions {
    /// Bisections allowed per original step.
    pub max_depth: u32,
    /// A step is safe when every displacement is below `safety × min gap`.
    pub safety: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self {
            max_depth: 24,
            safety: 0.5,
        }
    }
}

/// Eigenvalues continued along a (refined) path.
#[derive(Debug, Clone)]
pub struct SpectralTrace {
    path: DiscretizedPath,
    spectra: Vec<LabeledSpectrum>,
    /// Step `k` sends sorted index `i` at sample `k` to `matchings[k].apply(i)`.
    matchings: Vec<Permutation>,
    refinement_depth: Vec<u32>,
}

/// Traces the eigenvalues of `f` along `path`.
pub fn trace(f: &OperatorFamily, path: &DiscretizedPath, opts: &TrackingOptions) -> Result<SpectralTrace, HolonomyError> {
    trace_with(f, path, opts)
}

/// Traces any spectrum source along `path`, bisecting unsafe steps.
pub fn trace_with<S: SpectrumSource + ?Sized>(
    source: &S,
    path: &DiscretizedPath,
    opts: &TrackingOptions,
) -> Result<SpectralTrace, HolonomyError> {
    if path.len() < 2 {
        return Err(HolonomyError::DegenerateSpec("path needs at least two samples".into()));
    }
    let labelled: Vec<Result<LabeledSpectrum, HolonomyError>> = path
        .samples()
        .par_iter()
        .enumerate()
        .map(|(k, s)| labelled_at(source, &s.point, k))
        .collect();
    let labelled = labelled.into_iter().collect::<Result<Vec<_>, _>>()?;
    let n = labelled[0].len();
    if let Some(bad) = labelled.iter().find(|l| l.len() != n) {
        return Err(HolonomyError::SpectrumSize {
            expected: n,
            got: bad.len(),
        });
    }

    let mut tracer = Tracer {
        source,
        path,
        opts,
        samples: vec![path.samples()[0].clone()],
        spectra: vec![labelled[0].clone()],
        matchings: Vec::new(),
        depths: Vec::new(),
    };
    for k in 0..path.len() - 1 {
        let a = (path.samples()[k].clone(), labelled[k].clone());
        let b = (path.samples()[k + 1].clone(), labelled[k + 1].clone());
        tracer.step(k, a, b, 0)?;
    }
    let refined = path.with_samples(tracer.samples);
    Ok(SpectralTrace {
        path: refined,
        spectra: tracer.spectra,
        matchings: tracer.matchings,
        refinement_depth: tracer.depths,
    })
}

fn labelled_at<S: SpectrumSource + ?Sized>(
    source: &S,
    x: &ParameterPoint,
    sample: usize,
) -> Result<LabeledSpectrum, HolonomyError> {
    let s = source.spectrum(x)?;
    spectra::label(&s).map_err(|e| match e {
        SpectraError::DegenerateSpectrum { min_gap, .. } => HolonomyError::OnDiscriminant {
            sample,
            point: x.coords().to_vec(),
            min_gap,
        },
        other => other.into(),
    })
}

struct Tracer<'a, S: ?Sized> {
    source: &'a S,
    path: &'a DiscretizedPath,
    opts: &'a TrackingOptions,
    samples: Vec<Sample>,
    spectra: Vec<LabeledSpectrum>,
    matchings: Vec<Permutation>,
    depths: Vec<u32>,
}

impl<S: SpectrumSource + ?Sized> Tracer<'_, S> {
    fn step(
        &mut self,
        k: usize,
        a: (Sample, LabeledSpectrum),
        b: (Sample, LabeledSpectrum),
        depth: u32,
    ) -> Result<(), HolonomyError> {
        let (assignment, displacement) = best_assignment(a.1.values(), b.1.values());
        let gap = min_pairwise_gap(a.1.values()).min(min_pairwise_gap(b.1.values()));
        if displacement < self.opts.safety * gap {
            self.samples.push(b.0);
            self.spectra.push(b.1);
            self.matchings.push(assignment);
            self.depths.push(depth);
            return Ok(());
        }
        if depth >= self.opts.max_depth {
            return Err(HolonomyError::TrackingAmbiguous {
                step: k,
                segment: self.path.piece_of(&a.0),
                point: a.0.point.coords().to_vec(),
                depth,
            });
        }
        let mid = self.path.midpoint(&a.0, &b.0);
        let mid_spec = labelled_at(self.source, &mid.point, k)?;
        if mid_spec.len() != a.1.len() {
            return Err(HolonomyError::SpectrumSize {
                expected: a.1.len(),
                got: mid_spec.len(),
            });
        }
        let m = (mid, mid_spec);
        self.step(k, a, m.clone(), depth + 1)?;
        self.step(k, m, b, depth + 1)
    }
}

/// Minimum-total-distance assignment by exhaustive search, with the largest
/// single displacement of the winner. Ties keep the first candidate found.
pub fn best_assignment(from: &[Complex64], to: &[Complex64]) -> (Permutation, f64) {
    let n = from.len();
    let dist: Vec<Vec<f64>> = from.iter().map(|a| to.iter().map(|b| (a - b).norm()).collect()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| dist[i][j]).sum::<f64>();
    let mut best = perm.clone();
    let mut best_cost = cost(&perm);
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let cc = cost(&perm);
            if cc < best_cost {
                best_cost = cc;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let displacement = best.iter().enumerate().map(|(i, &j)| dist[i][j]).fold(0.0, f64::max);
    let p = Permutation::from_images(best).expect("Heap's algorithm yields permutations");
    (p, displacement)
}

impl SpectralTrace {
    pub fn path(&self) -> &DiscretizedPath {
        &self.path
    }

    /// Per-sample spectra in that sample's own label order.
    pub fn spectra(&self) -> &[LabeledSpectrum] {
        &self.spectra
    }

    pub fn matchings(&self) -> &[Permutation] {
        &self.matchings
    }

    pub fn refinement_depth(&self) -> &[u32] {
        &self.refinement_depth
    }

    pub fn max_refinement_depth(&self) -> u32 {
        self.refinement_depth.iter().copied().max().unwrap_or(0)
    }

    /// Composition of all step matchings: start label → end label.
    pub fn net_permutation(&self) -> Permutation {
        let n = self.spectra[0].len();
        self.matchings
            .iter()
            .try_fold(Permutation::identity(n), |acc, m| compose(m, &acc))
            .expect("matchings share one size")
    }

    /// Values following each base-label sheet, one row per sample.
    pub fn continued_sheets(&self) -> Vec<Vec<Complex64>> {
        let n = self.spectra[0].len();
        let mut pos: Vec<usize> = (0..n).collect();
        let mut rows = Vec::with_capacity(self.spectra.len());
        rows.push(self.spectra[0].values().to_vec());
        for (m, s) in self.matchings.iter().zip(&self.spectra[1..]) {
            for p in &mut pos {
                *p = m.apply(*p);
            }
            rows.push(pos.iter().map(|&p| s.values()[p]).collect());
        }
        rows
    }

    /// CSV with one row per sample and one column pair per continued sheet.
    pub fn write_csv<W: Write>(&self, params: &[String], mut w: W) -> io::Result<()> {
        let n = self.spectra[0].len();
        let mut header = vec!["sample_index".to_string(), "t".to_string()];
        header.extend(params.iter().cloned());
        for k in 1..=n {
            header.push(format!("re_lambda_{k}"));
            header.push(format!("im_lambda_{k}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, (sample, row)) in self.path.samples().iter().zip(self.continued_sheets()).enumerate() {
            let mut fields = vec![k.to_string(), format!("{:.16e}", sample.t)];
            fields.extend(sample.point.coords().iter().map(|x| format!("{x:.16e}")));
            for z in row {
                fields.push(format!("{:.16e}", z.re));
                fields.push(format!("{:.16e}", z.im));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Permutation of the base-point labels induced by a traced loop.
pub fn loop_permutation(t: &SpectralTrace) -> Result<Permutation, HolonomyError> {
    if !t.path.is_loop() {
        return Err(HolonomyError::NotALoop);
    }
    Ok(t.net_permutation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;
    use crate::holonomy::path::{discretize, Orientation, PathSpec, Plane};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn assignment_finds_the_crossing_free_matching() {
        let from = [c(0.0, 1.0), c(0.0, 0.0), c(0.0, -1.0)];
        let to = [c(0.1, -1.0), c(0.1, 1.0), c(0.1, 0.0)];
        let (p, d) = best_assignment(&from, &to);
        assert_eq!(p.images(), &[1, 2, 0]);
        assert!((d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn assignment_scans_all_eight_factorial() {
        let from: Vec<Complex64> = (0..8).map(|k| c(k as f64, 0.0)).collect();
        let to: Vec<Complex64> = (0..8).rev().map(|k| c(k as f64, 0.01)).collect();
        let (p, _) = best_assignment(&from, &to);
        assert_eq!(p.images(), &[7, 6, 5, 4, 3, 2, 1, 0]);
    }

    #[test]
    fn constant_path_gives_identity_matchings() {
        let f = builtin("waveguide_T").unwrap();
        let x = ParameterPoint::new(vec![0.3, 0.7, 1.0]);
        let path = DiscretizedPath::from_points(vec![x.clone(); 5]);
        let t = trace(&f, &path, &TrackingOptions::default()).unwrap();
        assert!(t.matchings().iter().all(Permutation::is_identity));
        assert!(loop_permutation(&t).unwrap().is_identity());
    }

    #[test]
    fn loop_through_the_ep3_hits_the_discriminant() {
        let f = builtin("waveguide_T").unwrap();
        let spec = PathSpec::circle(Plane::new("re_z", "im_z", &[("c", 1.0)]), [0.3, 0.0], 0.3, Orientation::CCW, std::f64::consts::PI);
        let path = discretize(&spec, f.params(), 32).unwrap();
        assert!(matches!(
            trace(&f, &path, &TrackingOptions::default()),
            Err(HolonomyError::OnDiscriminant { sample: 0, .. })
        ));
    }

    #[test]
    fn open_path_is_not_a_loop() {
        let f = builtin("waveguide_T").unwrap();
        let path = DiscretizedPath::from_points(vec![
            ParameterPoint::new(vec![0.3, 0.7, 1.0]),
            ParameterPoint::new(vec![0.4, 0.7, 1.0]),
        ]);
        let t = trace(&f, &path, &TrackingOptions::default()).unwrap();
        assert_eq!(loop_permutation(&t), Err(HolonomyError::NotALoop));
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let f = builtin("waveguide_T").unwrap();
        let spec = PathSpec::circle(Plane::new("re_z", "im_z", &[("c", 1.0)]), [0.0, 0.0], 0.3, Orientation::CCW, 0.0);
        let path = discretize(&spec, f.params(), 32).unwrap();
        let t = trace(&f, &path, &TrackingOptions::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(f.params(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample_index,t,re_z,im_z,c,re_lambda_1,im_lambda_1,re_lambda_2,im_lambda_2,re_lambda_3,im_lambda_3");
        assert_eq!(lines.len(), t.path().len() + 1);
        assert_eq!(lines[1].split(',').count(), 11);
    }
}
