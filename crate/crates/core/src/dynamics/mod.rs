//! Propagation of the field amplitudes along the waveguides and the
//! observables recorded on the way.

pub mod propagate;
pub mod state;

pub use propagate::{
    boundary_sites, propagate, propagate_with, return_intensity, ObservableSeries, Propagation,
    PropagationMethod, PropagationOptions, SiteWindow, SpectralPropagator, LEAKAGE_THRESHOLD,
};
pub use state::{center_of_mass, fidelity, single_site_state, two_site_phase_state, FieldState};
