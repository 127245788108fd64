int main(void) {
    int x = 5;
    int y = 7;
    while (x < y) {
        y = y + 0;
    }
    return x;
}
