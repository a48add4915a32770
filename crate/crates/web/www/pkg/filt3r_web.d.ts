/* tslint:disable */
/* eslint-disable */

/**
 * Per-frame series from one simulated run. Frame 1 is the initialization
 * frame: gain 1, process noise 0, drift score 0.
 */
export class Simulation {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly gain: Float64Array;
    readonly processNoise: Float64Array;
    readonly rmse: Float64Array;
    readonly score: Float64Array;
    readonly smoothedScore: Float64Array;
    readonly threshold: number;
    /**
     * Detected transition windows flattened as `[start, end, start, end, ...]`.
     */
    readonly windows: Float64Array;
}

/**
 * Runs `policy_json` (e.g. `{"kind":"fixed-beta","beta":0.05}`) over a
 * 16-token, 4-dimensional static scene with an optional abrupt transition.
 */
export function simulate(policy_json: string, seed: number, length: number, measurement_std: number, transition_frame: number, transition_magnitude: number): Simulation;

/**
 * Static-scene gain and posterior variance for frames `1..=frames`,
 * returned as `[k_1, p_1, k_2, p_2, ...]`.
 */
export function staticGainCurve(p0: number, r: number, frames: number): Float64Array;

/**
 * Steady-state gain k* for `points` log-spaced ratios q/r in
 * `[ratio_lo, ratio_hi]`, returned as `[ratio, k*, ratio, k*, ...]`.
 */
export function steadyStateCurve(ratio_lo: number, ratio_hi: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly simulation_gain: (a: number) => [number, number];
    readonly simulation_processNoise: (a: number) => [number, number];
    readonly simulation_rmse: (a: number) => [number, number];
    readonly simulation_score: (a: number) => [number, number];
    readonly simulation_smoothedScore: (a: number) => [number, number];
    readonly simulation_threshold: (a: number) => number;
    readonly simulation_windows: (a: number) => [number, number];
    readonly staticGainCurve: (a: number, b: number, c: number) => [number, number];
    readonly steadyStateCurve: (a: number, b: number, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
