/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const ctransform_1d: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const mass_factor_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const simulation_advance: (a: number, b: number) => [number, number];
export const simulation_density: (a: number) => [number, number];
export const simulation_mass: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const simulation_nutrient: (a: number) => [number, number];
export const simulation_pressure: (a: number) => [number, number];
export const simulation_size: (a: number) => number;
export const simulation_time: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
