pub mod archive;
pub mod dmd;
pub mod error;
pub mod io;
pub mod latent;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optdmd;
pub mod reduction;
pub mod regression;
pub mod rkoi;
pub mod roi;
pub mod scalar;
pub mod snapshot;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::{Field, Real, C};

pub type Matrix64 = linalg::Matrix<f64>;
pub type TimeGrid64 = snapshot::TimeGrid<f64>;
pub type Snapshots64 = snapshot::SnapshotMatrix<f64>;
pub type Dataset64 = snapshot::ParametricDataset<f64>;
pub type Basis64 = reduction::GlobalBasis<f64>;
pub type Latent64 = reduction::LatentDataset<f64>;
pub type Dmd64 = dmd::DmdModel<f64>;
pub type OptDmd64 = optdmd::OptDmdModel<f64>;
pub type Roi64 = roi::RoiModel<f64>;
pub type Rkoi64 = rkoi::RkoiModel<f64>;
pub type Monolithic64 = latent::MonolithicModel<f64>;
pub type Partitioned64 = latent::PartitionedModel<f64>;
pub type Model64 = model::TrainedModel<f64>;
