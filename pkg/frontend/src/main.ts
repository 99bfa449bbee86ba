import { mount } from "./app.js";

const root = document.getElementById("app");
if (root) {
  // served at /ui by the procforge service, so the API is one level up
  mount(root, "");
}
