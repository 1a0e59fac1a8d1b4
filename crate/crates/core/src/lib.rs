//! Eigenvalue permutations ("spectral holonomy") of parametrised
//! non-Hermitian operator families.
//!
//! The crate locates the degeneracy set of a family through its discriminant,
//! continues eigenvalues along based loops in parameter space and reads off the
//! induced permutation. Loop algebra (concatenation, reversal, pull-back along
//! bridges) maps onto permutation algebra, which is what makes non-commuting
//! exceptional points observable.
//!
//! ```
//! use spectral_holonomy::family::builtin;
//! use spectral_holonomy::holonomy::{discretize, loop_permutation, trace, Orientation, PathSpec, Plane, TrackingOptions};
//!
//! let t = builtin("waveguide_T")?;
//! let plane = Plane::new("re_z", "c", &[("im_z", 0.1)]);
//! let spec = PathSpec::circle(plane, [0.0, -1.0], 1.2, Orientation::CCW, 0.0);
//! let path = discretize(&spec, t.params(), 64)?;
//! let tr = trace(&t, &path, &TrackingOptions::default())?;
//! assert_eq!(loop_permutation(&tr)?.to_string(), "(123)");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cartography;
pub mod family;
pub mod holonomy;
pub mod spectra;
pub mod waveguide;
