//! Exact mod-p local computations for GL2 over unramified p-adic fields.

pub mod exactnum;
pub mod ffield;

pub use exactnum::{cyclo_mul, root_of_unity, CycloInt, NumError, PadicScaled, WittElem, WittRing};
pub use ffield::{char_eval, embeddings, make_field, Fe, FieldEmbedding, FieldError, FiniteField, MultChar};
pub mod rhobar;
pub use rhobar::{frontier, Mutation, GenericRho, RhoContext, RhoError, SerreWeight, SubsetJ, TameChar};
pub mod sdiv;
pub use sdiv::{SDivModule, SdivError};
pub mod jacobi;
pub use jacobi::{certify, jacobi_sum, stickelberger, JacobiError, JacobiSumResult};
pub mod pseries;
pub use pseries::{PSParams, PSVector, PsError};
pub mod modrep;
pub use modrep::{BrauerChar, ClassTable, Gl2, GrothElem, IrrBasis, ModrepError};
pub mod record;
pub use record::{RecordError, RhoRecord};
pub mod suites;
pub use suites::{GridConfig, SuiteReport};
