/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const simulation_gain: (a: number) => [number, number];
export const simulation_processNoise: (a: number) => [number, number];
export const simulation_rmse: (a: number) => [number, number];
export const simulation_score: (a: number) => [number, number];
export const simulation_smoothedScore: (a: number) => [number, number];
export const simulation_threshold: (a: number) => number;
export const simulation_windows: (a: number) => [number, number];
export const staticGainCurve: (a: number, b: number, c: number) => [number, number];
export const steadyStateCurve: (a: number, b: number, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
