export function formatRate(value) {
    return value.toFixed(1);
}
export function formatQuality(value) {
    return value.toFixed(2);
}
export function formatKappa(value) {
    return value.toFixed(4);
}
export function reportRows(report) {
    const [ra, rb] = report.rater_ids;
    const a = report.per_rater[ra];
    const b = report.per_rater[rb];
    const c = report.combined;
    return [
        { label: "Validation Rate (%)", values: [formatRate(a.validation_rate), formatRate(b.validation_rate), formatRate(c.validation_rate)] },
        { label: "Average Quality Score", values: [formatQuality(a.avg_quality), formatQuality(b.avg_quality), formatQuality(c.avg_quality)] },
        { label: "High Quality (Score >= 4)", values: [`${formatRate(a.high_pct)}%`, `${formatRate(b.high_pct)}%`, `${formatRate(c.high_pct)}%`] },
        { label: "Acceptable (Score = 3)", values: [`${formatRate(a.acceptable_pct)}%`, `${formatRate(b.acceptable_pct)}%`, `${formatRate(c.acceptable_pct)}%`] },
        { label: "Low Quality (Score <= 2)", values: [`${formatRate(a.low_pct)}%`, `${formatRate(b.low_pct)}%`, `${formatRate(c.low_pct)}%`] },
    ];
}
export function kappaLines(report) {
    return [
        `Binary Agreement: kappa = ${formatKappa(report.kappa_binary.kappa)} (${report.kappa_binary.label})`,
        `Quality Agreement: kappa = ${formatKappa(report.kappa_quality.kappa)} (${report.kappa_quality.label}) [weighting: ${report.quality_weighting}]`,
    ];
}
