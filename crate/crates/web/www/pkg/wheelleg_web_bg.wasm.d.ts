/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_trace_free: (a: number, b: number) => void;
export const closed_loop_poles: (a: number, b: number, c: number) => [number, number, number, number];
export const gain_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const scenario_names: () => [number, number];
export const simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const trace_gamma: (a: number) => [number, number];
export const trace_gamma_d: (a: number) => [number, number];
export const trace_outcome: (a: number) => [number, number];
export const trace_psi: (a: number) => [number, number];
export const trace_report: (a: number) => [number, number];
export const trace_split: (a: number) => [number, number];
export const trace_t: (a: number) => [number, number];
export const trace_theta: (a: number) => [number, number];
export const trace_v_d: (a: number) => [number, number];
export const trace_x_dot: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
