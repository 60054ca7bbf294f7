pub mod quadcore;
pub mod profiles;
pub mod modes;
pub mod fluid;
pub mod stress;
pub mod response;
pub mod audit;
