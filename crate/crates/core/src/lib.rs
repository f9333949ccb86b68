pub mod numcore;
pub mod model;
pub mod nnbound;
pub mod certify;
pub mod sim;
