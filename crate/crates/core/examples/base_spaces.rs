//! Sampled base spaces, the adjoined limit point, and base maps.
//!
//! ```bash
//! cargo run -p qlimit --example base_spaces
//! ```

use qlimit::base_space::{compose, is_metric_map, is_proper, make_geometric_grid, BaseMap, Point};
use qlimit::SampledBaseSpace;

fn main() -> qlimit::Result<()> {
    let grid = make_geometric_grid(0.5, 0.5, 8)?;
    println!("grid: {:?}", grid.points());

    let closed = grid.one_point_compactify()?;
    println!("has limit: {}", closed.has_limit());
    println!(
        "d(hbar_3, 0) = {:.6}",
        closed.distance(Point::Sample(3), Point::Limit)
    );

    // hbar -> hbar - hbar^2/2 moves every sample towards the limit
    let alpha = BaseMap::image_grid(&grid, |h| h - 0.5 * h * h)?;
    println!("metric map: {}", is_metric_map(&alpha).is_metric);
    println!("proper: {}", is_proper(&alpha));

    // the inclusion of every other sample
    let sub = grid.restrict_to(&[0, 2, 4, 6])?;
    let inc = BaseMap::inclusion(&sub, &grid)?;
    let id = BaseMap::identity(&grid);
    let both = compose(&id, &inc)?;
    println!("inclusion images: {:?}", both.images());

    let custom = SampledBaseSpace::from_points(vec![1.0, 0.4, 0.1])?;
    println!("custom grid distances to 0: {:?}", custom.limit_distances());
    Ok(())
}
