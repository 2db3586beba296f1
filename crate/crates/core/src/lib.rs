//! Core of the Sally semantic middleware: the wire protocol, the module
//! capability registry, the hosted semantic store, the reference MKM
//! services, the scriptable mock application model and the integration
//! cost model.

pub mod adm;
pub mod costmodel;
pub mod mockapp;
pub mod protocol;
pub mod registry;
pub mod services;
