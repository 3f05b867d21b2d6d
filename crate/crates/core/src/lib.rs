// Copyright 2026 The dpsync Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Simulator for differentially-private synchronization of an outsourced,
//! append-only database.
//!
//! An owner receives at most one record per tick, buffers it in a local
//! cache and decides, through a [`SyncStrategy`], when to push batches to an
//! untrusted server. The server only sees the update pattern: the time and
//! size of every batch. Private strategies pad batches with dummy records so
//! that pattern satisfies differential privacy, at some cost in logical gap
//! (records not yet outsourced) and storage.
//!
//! Core types are generic over the scalar used for privacy budgets and
//! noise ([`Real`], implemented for `f32` and `f64`); the aliases below fix
//! it to `f64`.

pub mod audit;
pub mod cache;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod noise;
pub mod query;
pub mod scalar;
pub mod sim;
pub mod store;
pub mod strategy;
pub mod stream;

pub use cache::{DummyFactory, LocalCache};
pub use error::{Error, Result};
pub use query::{Query, QueryAnswer};
pub use scalar::Real;
pub use sim::Replica;
pub use store::{OutsourcedStore, PatternEntry, UpdatePattern};
pub use strategy::{Cause, Probe, StrategyKind, SyncAction};
pub use stream::{BernoulliStream, GrowingDatabase, IngestOptions, Record};

pub type StrategyParams = strategy::StrategyParams<f64>;
pub type SyncStrategy = strategy::SyncStrategy<f64>;
pub type NoiseSource = noise::NoiseSource<f64>;
pub type MetricsReport = metrics::MetricsReport<f64>;
pub type BoundCheckConfig = audit::BoundCheckConfig<f64>;
pub type BoundCheckResult = audit::BoundCheckResult<f64>;
pub type AuditConfig = audit::AuditConfig<f64>;
pub type DPAuditResult = audit::DPAuditResult<f64>;
