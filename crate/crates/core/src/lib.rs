pub mod arith;
pub mod expsums;
pub mod numeric;
pub mod qforms;
pub mod cusp;
pub mod voronoi;
pub mod signs;
pub mod io;
