pub mod classify;
pub mod expr;
pub mod families;
pub mod geometry;
pub mod jets;
pub mod models;
pub mod point;
pub mod tensor;
pub mod verify;

pub use expr::{parse, EvalError, Expr, ParseError};
pub use jets::{Dd, Jet, JetError, MultiIndex, Scalar};
pub use point::{Coord, Point};
pub use tensor::{Frame, Metric, TensorAtPoint, TensorError};
pub use geometry::{ConnectionJet, GeometryError, MetricField};
pub use families::{Family, FamilyError, FamilySpec};
pub use models::{ModelError, ModelSpace, NormalForm};
pub use classify::{classify, invariant_table, ClassifyOptions, Execution, GridAxis, HomogeneityReport, InvariantTable, SampleSet, Status};
pub use verify::{verify, VerifyReport};
