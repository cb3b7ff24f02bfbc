pub mod bounds;
pub mod dist;
pub mod experiments;
pub mod quad;
pub mod scalar;
pub mod sim;
pub mod symexpr;
pub mod wine;

pub type Dist = dist::JobSizeDistribution<f64>;
pub type Params = bounds::SystemParams<f64>;
pub type Model = bounds::BoundModel<f64>;
pub type Wine = wine::WineResult<f64>;
