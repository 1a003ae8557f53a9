/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_signalfit_free: (a: number, b: number) => void;
export const bound_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const fit_signal: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const scaling_curve: (a: number, b: number) => [number, number, number, number];
export const signalfit_eta_hat: (a: number) => [number, number];
export const signalfit_levels: (a: number) => [number, number];
export const signalfit_regressions: (a: number) => number;
export const signalfit_rel_rmse: (a: number) => number;
export const signalfit_x: (a: number) => [number, number];
export const signalfit_y_noisy: (a: number) => [number, number];
export const signalfit_y_true: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
