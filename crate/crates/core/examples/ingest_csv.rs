//! Reads a sporadic CSV, reports what was found and shows how malformed
//! input is rejected with a line number.

use vsdn::data::{fit_norm_stats, read_sporadic_csv};

const GOOD: &str = "\
series_id,time,value_1,value_2,mask_1,mask_2
1,0.0,0.5,,1,0
1,0.7,0.2,-0.4,1,1
2,0.3,,1.1,0,1
1,0.2,0.9,0.1,1,1
2,1.0,0.8,1.3,1,1
";

const BAD: &str = "\
series_id,time,value_1,value_2,mask_1,mask_2
1,0.0,0.5,,1,0
1,0.2,,,0,0
";

fn main() -> anyhow::Result<()> {
    let series = read_sporadic_csv(GOOD.as_bytes())?;
    for s in &series {
        println!("series {}: times {:?}, {} observed cells", s.id(), s.times(), s.observed_cells());
    }
    let stats = fit_norm_stats(&series)?;
    println!("masked mean {:?}, std {:?}", stats.mean, stats.std);
    match read_sporadic_csv(BAD.as_bytes()) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
