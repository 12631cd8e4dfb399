//! Substrate networks, applications, user demand and deployments.

mod application;
mod demand;
mod deployment;
pub mod io;
mod network;
mod sink;
mod validate;

pub use application::{
    AppId, Application, EdgeSpec, FnId, Function, FunctionKind, LogicalLink, LogicalLinkId, TopologyKind, ROOT,
};
pub use demand::{aggregate_demand, Aggregate, DemandSet, User};
pub use deployment::{deployed_cost, deployment_cost, Deployment, Ledger, UserEmbedding};
pub use network::{Arc, ArcId, Dc, DcId, Layer, Link, LinkId, SubstrateNetwork};
pub use sink::{add_rejection_sink, DEFAULT_PENALTY};
pub use validate::{validate_deployment, FeasibilityReport, Violation, FEAS_TOL};
