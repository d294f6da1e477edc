/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_decompose: (a: number) => [number, number, number, number];
export const demo_dim: (a: number) => number;
export const demo_edges: (a: number) => [number, number];
export const demo_eigenvector: (a: number, b: number) => [number, number, number, number];
export const demo_flow: (a: number) => [number, number];
export const demo_kind: (a: number) => [number, number];
export const demo_n_edges: (a: number) => number;
export const demo_n_triangles: (a: number) => number;
export const demo_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const demo_points: (a: number) => [number, number];
export const demo_smooth: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const demo_spectrum: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
