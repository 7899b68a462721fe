pub mod density;
pub mod error;
pub mod io;
pub mod legendre;
pub mod mdc;
pub mod pipeline;
pub mod prewhiten;
pub mod quadrature;
pub mod sim;
pub mod special;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/special-functions.md")]
    mod special_functions {}
    #[doc = include_str!("../../../book/src/legendre-basis.md")]
    mod legendre_basis {}
    #[doc = include_str!("../../../book/src/preflattening.md")]
    mod preflattening {}
    #[doc = include_str!("../../../book/src/comparison-density.md")]
    mod comparison_density {}
    #[doc = include_str!("../../../book/src/pi0.md")]
    mod pi0 {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
