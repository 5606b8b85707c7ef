//! Gnuplot script emission for campaign figures.

use super::Marker;

/// A gnuplot script drawing the error histogram as boxes with one vertical
/// line per algorithm marker. The CSV paths are referenced, not embedded.
pub fn gnuplot_script(
    histogram_csv: &str,
    markers: &[Marker],
    output_png: &str,
    title: &str,
) -> String {
    let mut script = String::new();
    script.push_str("set datafile separator comma\n");
    script.push_str("set terminal pngcairo size 960,600\n");
    script.push_str(&format!("set output '{output_png}'\n"));
    script.push_str(&format!("set title '{title}'\n"));
    script.push_str("set xlabel 'estimation error e'\n");
    script.push_str("set ylabel 'count'\n");
    script.push_str("set style fill solid 0.5 border -1\n");
    let palette = ["#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e"];
    for (i, marker) in markers.iter().enumerate() {
        let color = palette[i % palette.len()];
        script.push_str(&format!(
            "set arrow {id} from {v:.10e}, graph 0 to {v:.10e}, graph 1 nohead lw 2 lc rgb '{color}'\n",
            id = i + 1,
            v = marker.value,
        ));
        script.push_str(&format!(
            "set label {id} '{label}' at {v:.10e}, graph {y:.2} tc rgb '{color}'\n",
            id = i + 1,
            label = marker.label,
            v = marker.value,
            y = 0.95 - 0.05 * i as f64,
        ));
    }
    script.push_str(&format!(
        "plot '{histogram_csv}' skip 1 using (($1+$2)/2):3:($2-$1) with boxes title 'random selections'\n"
    ));
    script
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_references_inputs_and_markers() {
        let markers = vec![
            Marker { label: "mads".into(), value: 0.25, outlier: false },
            Marker { label: "milp2".into(), value: 0.5, outlier: false },
        ];
        let script = gnuplot_script("hist.csv", &markers, "fig.png", "memory M=10");
        assert!(script.contains("hist.csv"));
        assert!(script.contains("fig.png"));
        assert!(script.contains("set arrow 2"));
        assert!(script.contains("mads"));
    }
}
