//! Small numerical kernels shared by the constructions: an embedded
//! Runge-Kutta pair, Gauss-Legendre rules, quintic Hermite interpolation,
//! bracketing root finding and a banded LU factorization.

pub(crate) mod banded;
pub(crate) mod interp;
pub(crate) mod ode;
pub(crate) mod quad;
pub(crate) mod roots;
